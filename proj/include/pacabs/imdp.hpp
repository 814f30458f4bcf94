#pragma once

// Interval MDPs, robust value iteration, instantiation and text export.

#include "pacabs/core.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace pacabs {

inline constexpr double kFeasibilityTol = 1e-9;

enum class SpecKind {
    ReachAvoid,  // reach a goal state within K steps, never entering an absorbing state
    Safety,      // avoid absorbing states for K steps
};

inline const char* to_string(SpecKind k) { return k == SpecKind::ReachAvoid ? "reach-avoid" : "safety"; }

inline SpecKind parse_spec_kind(const std::string& s) {
    if (s == "reach-avoid") return SpecKind::ReachAvoid;
    if (s == "safety") return SpecKind::Safety;
    fail("unknown specification kind '" + s + "' (expected reach-avoid or safety)");
}

struct Edge {
    std::size_t successor = 0;
    double lower = 0.0;
    double upper = 0.0;
};

struct Choice {
    int action = -1;
    std::vector<Edge> edges;  // sorted by successor
};

/// States 0..S-1. Goal states and absorbing (failure) states carry no
/// choices; their values are fixed by the specification. State 0 is
/// always absorbing.
class IntervalMDP {
public:
    IntervalMDP() = default;
    IntervalMDP(std::size_t num_states, int horizon, SpecKind spec = SpecKind::ReachAvoid)
        : choices_(num_states), goal_(num_states, false), absorbing_(num_states, false), horizon_(horizon), spec_(spec) {
        require(num_states >= 1, "IntervalMDP: need at least the absorbing state");
        require(horizon >= 0, "IntervalMDP: negative horizon");
        absorbing_[0] = true;
    }

    std::size_t num_states() const { return choices_.size(); }
    int horizon() const { return horizon_; }
    SpecKind spec() const { return spec_; }
    void set_horizon(int K) {
        require(K >= 0, "IntervalMDP: negative horizon");
        horizon_ = K;
    }

    void set_goal(std::size_t s, bool v = true) {
        require(s < num_states() && s != 0, "IntervalMDP::set_goal: invalid state");
        goal_[s] = v;
    }
    void set_absorbing(std::size_t s, bool v = true) {
        require(s < num_states() && s != 0, "IntervalMDP::set_absorbing: invalid state");
        absorbing_[s] = v;
    }
    bool is_goal(std::size_t s) const { return goal_.at(s); }
    bool is_absorbing(std::size_t s) const { return absorbing_.at(s); }
    /// True for states whose value is fixed (no decisions taken there).
    bool is_terminal(std::size_t s) const { return absorbing_[s] || (spec_ == SpecKind::ReachAvoid && goal_[s]); }

    /// Adds a choice for state s after validating that some distribution
    /// fits the intervals.
    void add_choice(std::size_t s, int action, std::vector<Edge> edges) {
        require(s < num_states(), "IntervalMDP::add_choice: state out of range");
        require(s != 0, "IntervalMDP::add_choice: the absorbing state has no actions");
        std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return a.successor < b.successor; });
        double lo = 0.0, hi = 0.0;
        for (std::size_t k = 0; k < edges.size(); ++k) {
            const auto& e = edges[k];
            require(e.successor < num_states(), "IntervalMDP::add_choice: successor out of range");
            require(k == 0 || edges[k - 1].successor != e.successor, "IntervalMDP::add_choice: duplicate successor");
            require(0.0 <= e.lower && e.lower <= e.upper && e.upper <= 1.0,
                    "IntervalMDP::add_choice: invalid interval [" + std::to_string(e.lower) + "," + std::to_string(e.upper) + "]");
            lo += e.lower;
            hi += e.upper;
        }
        if (lo > 1.0 + kFeasibilityTol || hi < 1.0 - kFeasibilityTol)
            fail("IntervalMDP::add_choice: empty ambiguity set at state " + std::to_string(s) + " action " +
                 std::to_string(action));
        choices_[s].push_back({action, std::move(edges)});
    }

    const std::vector<Choice>& choices(std::size_t s) const { return choices_.at(s); }

    std::size_t num_choices() const {
        std::size_t c = 0;
        for (const auto& v : choices_) c += v.size();
        return c;
    }
    std::size_t num_transitions() const {
        std::size_t c = 0;
        for (const auto& v : choices_)
            for (const auto& ch : v) c += ch.edges.size();
        return c;
    }

    bool operator==(const IntervalMDP& o) const {
        if (num_states() != o.num_states() || horizon_ != o.horizon_ || spec_ != o.spec_ || goal_ != o.goal_ ||
            absorbing_ != o.absorbing_)
            return false;
        for (std::size_t s = 0; s < num_states(); ++s) {
            const auto& a = choices_[s];
            const auto& b = o.choices_[s];
            if (a.size() != b.size()) return false;
            for (std::size_t c = 0; c < a.size(); ++c) {
                if (a[c].action != b[c].action || a[c].edges.size() != b[c].edges.size()) return false;
                for (std::size_t e = 0; e < a[c].edges.size(); ++e) {
                    const auto& x = a[c].edges[e];
                    const auto& y = b[c].edges[e];
                    if (x.successor != y.successor || x.lower != y.lower || x.upper != y.upper) return false;
                }
            }
        }
        return true;
    }

private:
    std::vector<std::vector<Choice>> choices_;
    std::vector<bool> goal_;
    std::vector<bool> absorbing_;
    int horizon_ = 0;
    SpecKind spec_ = SpecKind::ReachAvoid;
};

struct WorstCase {
    double value = 0.0;
    std::vector<double> witness;
};

/// min over p with lower <= p <= upper, sum p = 1 of sum p_k v_k.
/// Lower bounds first, then the remaining mass to the cheapest successors.
inline WorstCase worst_case_expectation(const std::vector<Edge>& edges, const std::vector<double>& values) {
    WorstCase out;
    out.witness.assign(edges.size(), 0.0);
    double lo_sum = 0.0, hi_sum = 0.0;
    for (std::size_t k = 0; k < edges.size(); ++k) {
        out.witness[k] = edges[k].lower;
        lo_sum += edges[k].lower;
        hi_sum += edges[k].upper;
    }
    if (lo_sum > 1.0 + kFeasibilityTol || hi_sum < 1.0 - kFeasibilityTol) fail("worst_case_expectation: empty ambiguity set");
    std::vector<std::size_t> order(edges.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return values[edges[a].successor] < values[edges[b].successor];
    });
    double remaining = 1.0 - lo_sum;
    for (auto k : order) {
        if (remaining <= 0.0) break;
        const double add = std::min(edges[k].upper - edges[k].lower, remaining);
        out.witness[k] += add;
        remaining -= add;
    }
    for (std::size_t k = 0; k < edges.size(); ++k) out.value += out.witness[k] * values[edges[k].successor];
    return out;
}

/// Convenience overload over plain (lower, upper, value) triples.
inline WorstCase worst_case_expectation(const std::vector<double>& lower, const std::vector<double>& upper,
                                        const std::vector<double>& values) {
    require(lower.size() == upper.size() && upper.size() == values.size(), "worst_case_expectation: length mismatch");
    std::vector<Edge> edges(lower.size());
    for (std::size_t k = 0; k < edges.size(); ++k) edges[k] = {k, lower[k], upper[k]};
    return worst_case_expectation(edges, values);
}

/// Time-indexed policy: value(k, s) for k = 0..K, action(k, s) for
/// k = 0..K-1 (-1 where no action applies).
struct PolicyTable {
    std::size_t num_states = 0;
    int horizon = 0;
    std::vector<double> values;   // (K+1) x S, row k
    std::vector<int> actions;     // K x S
    std::vector<int> choice_index;  // K x S, index into imdp.choices(s)

    double value(int k, std::size_t s) const { return values[std::size_t(k) * num_states + s]; }
    int action(int k, std::size_t s) const { return actions[std::size_t(k) * num_states + s]; }
    int choice(int k, std::size_t s) const { return choice_index[std::size_t(k) * num_states + s]; }
    /// Robust lower bound on the satisfaction probability from state s.
    double lambda(std::size_t s) const { return value(0, s); }
};

inline std::vector<double> terminal_values(const IntervalMDP& imdp) {
    std::vector<double> v(imdp.num_states(), 0.0);
    for (std::size_t s = 0; s < imdp.num_states(); ++s) {
        if (imdp.is_absorbing(s)) continue;
        if (imdp.spec() == SpecKind::ReachAvoid) v[s] = imdp.is_goal(s) ? 1.0 : 0.0;
        else v[s] = 1.0;
    }
    return v;
}

/// Backward induction of the max-min Bellman operator; ties go to the
/// choice listed first (lowest action index for sorted inputs).
inline PolicyTable robust_value_iteration(const IntervalMDP& imdp, unsigned workers = 0) {
    const std::size_t S = imdp.num_states();
    const int K = imdp.horizon();
    PolicyTable pol;
    pol.num_states = S;
    pol.horizon = K;
    pol.values.assign(std::size_t(K + 1) * S, 0.0);
    pol.actions.assign(std::size_t(K) * S, -1);
    pol.choice_index.assign(std::size_t(K) * S, -1);
    const auto term = terminal_values(imdp);
    std::copy(term.begin(), term.end(), pol.values.begin() + std::ptrdiff_t(std::size_t(K) * S));
    std::vector<double> next(term);
    std::vector<double> cur(S, 0.0);
    for (int k = K - 1; k >= 0; --k) {
        parallel_for(S, [&](std::size_t s) {
            if (imdp.is_terminal(s)) {
                cur[s] = term[s];
                return;
            }
            double best = 0.0;
            int best_choice = -1;
            const auto& ch = imdp.choices(s);
            for (std::size_t c = 0; c < ch.size(); ++c) {
                const double v = worst_case_expectation(ch[c].edges, next).value;
                if (best_choice < 0 || v > best) {
                    best = v;
                    best_choice = int(c);
                }
            }
            cur[s] = std::clamp(best, 0.0, 1.0);
            if (best_choice >= 0) {
                pol.choice_index[std::size_t(k) * S + s] = best_choice;
                pol.actions[std::size_t(k) * S + s] = ch[std::size_t(best_choice)].action;
            }
        }, workers);
        std::copy(cur.begin(), cur.end(), pol.values.begin() + std::ptrdiff_t(std::size_t(k) * S));
        std::swap(cur, next);
    }
    return pol;
}

/// MDP with point probabilities: probs[s][c][e] aligned with the interval
/// MDP's edges.
struct PointMDP {
    const IntervalMDP* source = nullptr;
    std::vector<std::vector<std::vector<double>>> probs;
};

using InstantiationSelector = std::function<std::vector<double>(std::size_t state, std::size_t choice, const Choice&)>;

inline PointMDP instantiate(const IntervalMDP& imdp, const InstantiationSelector& selector) {
    PointMDP mdp;
    mdp.source = &imdp;
    mdp.probs.resize(imdp.num_states());
    for (std::size_t s = 0; s < imdp.num_states(); ++s) {
        const auto& ch = imdp.choices(s);
        for (std::size_t c = 0; c < ch.size(); ++c) {
            auto p = selector(s, c, ch[c]);
            require(p.size() == ch[c].edges.size(), "instantiate: selector returned wrong length");
            double sum = 0.0;
            for (std::size_t e = 0; e < p.size(); ++e) {
                if (p[e] < ch[c].edges[e].lower - kFeasibilityTol || p[e] > ch[c].edges[e].upper + kFeasibilityTol)
                    fail("instantiate: infeasible selection at state " + std::to_string(s));
                sum += p[e];
            }
            if (std::abs(sum - 1.0) > kFeasibilityTol) fail("instantiate: selection does not sum to 1 at state " + std::to_string(s));
            mdp.probs[s].push_back(std::move(p));
        }
    }
    return mdp;
}

/// Lower bounds plus the leftover mass on the first edge that can take it.
inline std::vector<double> lower_plus_residual(const Choice& ch) {
    std::vector<double> p(ch.edges.size());
    double rem = 1.0;
    for (std::size_t e = 0; e < p.size(); ++e) {
        p[e] = ch.edges[e].lower;
        rem -= p[e];
    }
    for (std::size_t e = 0; e < p.size() && rem > 0.0; ++e) {
        const double add = std::min(rem, ch.edges[e].upper - p[e]);
        p[e] += add;
        rem -= add;
    }
    return p;
}

/// Values of the point MDP under the time-indexed policy; returns
/// (K+1) x S like PolicyTable::values.
inline std::vector<double> evaluate_policy(const PointMDP& mdp, const PolicyTable& pol) {
    const auto& imdp = *mdp.source;
    const std::size_t S = imdp.num_states();
    const int K = pol.horizon;
    std::vector<double> values(std::size_t(K + 1) * S, 0.0);
    const auto term = terminal_values(imdp);
    std::copy(term.begin(), term.end(), values.begin() + std::ptrdiff_t(std::size_t(K) * S));
    for (int k = K - 1; k >= 0; --k) {
        const double* next = values.data() + std::size_t(k + 1) * S;
        double* cur = values.data() + std::size_t(k) * S;
        for (std::size_t s = 0; s < S; ++s) {
            if (imdp.is_terminal(s)) {
                cur[s] = term[s];
                continue;
            }
            const int c = pol.choice(k, s);
            if (c < 0) continue;
            const auto& edges = imdp.choices(s)[std::size_t(c)].edges;
            const auto& p = mdp.probs[s][std::size_t(c)];
            double v = 0.0;
            for (std::size_t e = 0; e < edges.size(); ++e) v += p[e] * next[edges[e].successor];
            cur[s] = v;
        }
    }
    return values;
}

// Text format:
//   imdp states=<S> horizon=<K> spec=<reach-avoid|safety> choices=<C> transitions=<T>
//   goal <s> <s> ...
//   absorbing <s> <s> ...
//   <s> <a> <s'> [<lower>,<upper>]        one line per transition
// Probabilities use %.17g so the text round-trips exactly.
inline void export_interval_model(const IntervalMDP& imdp, std::ostream& os) {
    os << "imdp states=" << imdp.num_states() << " horizon=" << imdp.horizon() << " spec=" << to_string(imdp.spec())
       << " choices=" << imdp.num_choices() << " transitions=" << imdp.num_transitions() << '\n';
    os << "goal";
    for (std::size_t s = 0; s < imdp.num_states(); ++s)
        if (imdp.is_goal(s)) os << ' ' << s;
    os << "\nabsorbing";
    for (std::size_t s = 0; s < imdp.num_states(); ++s)
        if (imdp.is_absorbing(s)) os << ' ' << s;
    os << '\n';
    char buf[128];
    for (std::size_t s = 0; s < imdp.num_states(); ++s)
        for (const auto& ch : imdp.choices(s))
            for (const auto& e : ch.edges) {
                std::snprintf(buf, sizeof buf, "%zu %d %zu [%.17g,%.17g]\n", s, ch.action, e.successor, e.lower, e.upper);
                os << buf;
            }
    if (!os) throw Error("export_interval_model: write failed");
}

inline IntervalMDP import_interval_model(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) fail("import_interval_model: empty input");
    std::size_t S = 0;
    int K = 0;
    char spec[32] = {0};
    std::size_t C = 0, T = 0;
    if (std::sscanf(line.c_str(), "imdp states=%zu horizon=%d spec=%31s choices=%zu transitions=%zu", &S, &K, spec, &C, &T) != 5)
        fail("import_interval_model: malformed header");
    IntervalMDP imdp(S, K, parse_spec_kind(spec));
    auto read_list = [&](const char* tag, auto setter) {
        if (!std::getline(is, line)) fail(std::string("import_interval_model: missing ") + tag + " line");
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word != tag) fail(std::string("import_interval_model: expected ") + tag + " line");
        std::size_t s;
        while (ls >> s) setter(s);
    };
    read_list("goal", [&](std::size_t s) { imdp.set_goal(s); });
    read_list("absorbing", [&](std::size_t s) {
        if (s != 0) imdp.set_absorbing(s);
    });
    std::size_t cur_s = SIZE_MAX;
    int cur_a = 0;
    std::vector<Edge> edges;
    auto flush = [&] {
        if (cur_s != SIZE_MAX) imdp.add_choice(cur_s, cur_a, std::move(edges));
        edges.clear();
    };
    std::size_t lines = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::size_t s, succ;
        int a;
        double lo, hi;
        if (std::sscanf(line.c_str(), "%zu %d %zu [%lf,%lf]", &s, &a, &succ, &lo, &hi) != 5)
            fail("import_interval_model: malformed transition line '" + line + "'");
        if (s != cur_s || a != cur_a) {
            flush();
            cur_s = s;
            cur_a = a;
        }
        edges.push_back({succ, lo, hi});
        ++lines;
    }
    flush();
    if (lines != T) fail("import_interval_model: transition count mismatch");
    return imdp;
}

/// policy.csv: state,k,action,value with one row per (state, k < K) and the
/// value at k; action -1 marks states without a decision.
inline void write_policy_csv(const PolicyTable& pol, std::ostream& os) {
    os << "state,k,action,value\n";
    char buf[96];
    for (std::size_t s = 0; s < pol.num_states; ++s)
        for (int k = 0; k < pol.horizon; ++k) {
            std::snprintf(buf, sizeof buf, "%zu,%d,%d,%.17g\n", s, k, pol.action(k, s), pol.value(k, s));
            os << buf;
        }
}

}  // namespace pacabs
