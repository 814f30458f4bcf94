#include "oracles/lp.hpp"
#include "pacabs/benchmarks.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace pacabs;

namespace {

// Random feasible edges over `succ` successors: a random distribution p,
// intervals [p - a, p + b] clipped to [0,1].
std::vector<Edge> random_edges(std::mt19937_64& rng, const std::vector<std::size_t>& succ) {
    std::uniform_real_distribution<double> U01(0, 1);
    std::vector<double> p(succ.size());
    double s = 0;
    for (auto& v : p) s += (v = U01(rng) + 1e-3);
    std::vector<Edge> e;
    for (std::size_t k = 0; k < succ.size(); ++k) {
        const double q = p[k] / s;
        e.push_back({succ[k], std::max(0.0, q - 0.3 * U01(rng)), std::min(1.0, q + 0.3 * U01(rng))});
    }
    return e;
}

IntervalMDP random_imdp(std::mt19937_64& rng, SpecKind spec) {
    const std::size_t S = 2 + rng() % 4;
    const int K = 1 + int(rng() % 4);
    IntervalMDP m(S, K, spec);
    for (std::size_t s = 1; s < S; ++s) {
        if (rng() % 4 == 0) m.set_goal(s);
        else if (rng() % 6 == 0) m.set_absorbing(s);
    }
    for (std::size_t s = 1; s < S; ++s) {
        if (m.is_terminal(s)) continue;
        const int actions = 1 + int(rng() % 3);
        for (int a = 0; a < actions; ++a) {
            std::vector<std::size_t> succ;
            for (std::size_t j = 0; j < S; ++j)
                if (rng() % 2 == 0) succ.push_back(j);
            if (succ.empty()) succ.push_back(rng() % S);
            m.add_choice(s, a, random_edges(rng, succ));
        }
    }
    return m;
}

double lp_expectation(const std::vector<Edge>& edges, const std::vector<double>& v) {
    std::vector<double> lo, hi, vals;
    for (const auto& e : edges) {
        lo.push_back(e.lower);
        hi.push_back(e.upper);
        vals.push_back(v[e.successor]);
    }
    const auto r = oracle::min_expectation(lo, hi, vals);
    EXPECT_TRUE(r.feasible);
    return r.value;
}

IntervalMDP toy_two_state() {
    IntervalMDP m(2, 1);
    m.add_choice(1, 0, {{0, 0.25, 0.5}, {1, 0.5, 0.75}});
    m.add_choice(1, 1, {{1, 1, 1}});
    return m;
}

}  // namespace

TEST(WorstCase, PaperStyleExample) {
    const auto w = worst_case_expectation({0.1, 0.2, 0.3}, {0.5, 0.6, 0.7}, {1, 2, 3});
    EXPECT_NEAR(w.value, 1.8, 1e-12);
    EXPECT_NEAR(w.witness[0], 0.5, 1e-12);
    EXPECT_NEAR(w.witness[1], 0.2, 1e-12);
    EXPECT_NEAR(w.witness[2], 0.3, 1e-12);
    EXPECT_NEAR(oracle::min_expectation({0.1, 0.2, 0.3}, {0.5, 0.6, 0.7}, {1, 2, 3}).value, 1.8, 1e-9);
}

TEST(WorstCase, TrivialCases) {
    EXPECT_NEAR(worst_case_expectation({0.2, 0.8}, {0.2, 0.8}, {3, 5}).value, 0.6 + 4.0, 1e-12);
    EXPECT_EQ(worst_case_expectation({1.0}, {1.0}, {0.37}).value, 0.37);
    try {
        worst_case_expectation({0.6, 0.6}, {0.9, 0.9}, {0, 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("empty ambiguity set"), std::string::npos);
    }
}

TEST(WorstCase, GreedyMatchesLp) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> U01(0, 1);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t k = 2 + rng() % 19;
        std::vector<std::size_t> succ(k);
        std::iota(succ.begin(), succ.end(), 0);
        const auto edges = random_edges(rng, succ);
        std::vector<double> v(k);
        for (auto& x : v) x = U01(rng);
        const auto w = worst_case_expectation(edges, v);
        ASSERT_NEAR(w.value, lp_expectation(edges, v), 1e-9);
        double sum = 0;
        for (std::size_t e = 0; e < k; ++e) {
            EXPECT_GE(w.witness[e], edges[e].lower - 1e-15);
            EXPECT_LE(w.witness[e], edges[e].upper + 1e-15);
            sum += w.witness[e];
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(IntervalMDPConstruction, RejectsInfeasibleChoices) {
    IntervalMDP m(3, 2);
    EXPECT_THROW(m.add_choice(1, 0, {{1, 0.1, 0.2}, {2, 0.1, 0.2}}), Error);
    EXPECT_THROW(m.add_choice(0, 0, {{0, 1, 1}}), Error);
    EXPECT_THROW(m.add_choice(1, 0, {{1, 0.5, 0.4}}), Error);
}

TEST(RobustValueIteration, AllToGoal) {
    IntervalMDP m(4, 3);
    m.set_goal(3);
    m.add_choice(1, 0, {{3, 1, 1}});
    m.add_choice(2, 0, {{3, 1, 1}});
    const auto pol = robust_value_iteration(m);
    for (std::size_t s = 1; s < 4; ++s) EXPECT_EQ(pol.lambda(s), 1.0);
    EXPECT_EQ(pol.lambda(0), 0.0);
}

TEST(RobustValueIteration, ZeroHorizon) {
    IntervalMDP m(3, 0);
    m.set_goal(2);
    m.add_choice(1, 0, {{2, 1, 1}});
    const auto pol = robust_value_iteration(m);
    EXPECT_EQ(pol.lambda(1), 0.0);
    EXPECT_EQ(pol.lambda(2), 1.0);
    EXPECT_TRUE(pol.actions.empty());
}

TEST(RobustValueIteration, MatchesLpBruteForce) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 100; ++t) {
        const auto m = random_imdp(rng, t % 2 ? SpecKind::Safety : SpecKind::ReachAvoid);
        const auto pol = robust_value_iteration(m);
        const std::size_t S = m.num_states();
        std::vector<double> next = terminal_values(m);
        for (int k = m.horizon() - 1; k >= 0; --k) {
            std::vector<double> cur(S);
            for (std::size_t s = 0; s < S; ++s) {
                if (m.is_terminal(s)) {
                    cur[s] = next[s];
                    continue;
                }
                double best = 0;
                for (const auto& ch : m.choices(s)) best = std::max(best, lp_expectation(ch.edges, next));
                cur[s] = best;
            }
            for (std::size_t s = 0; s < S; ++s) ASSERT_NEAR(pol.value(k, s), cur[s], 1e-8) << "k=" << k << " s=" << s;
            next = cur;
        }
    }
}

TEST(RobustValueIteration, WideningNeverHelps) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> U01(0, 1);
    for (int t = 0; t < 200; ++t) {
        const auto m = random_imdp(rng, SpecKind::ReachAvoid);
        IntervalMDP wide(m.num_states(), m.horizon(), m.spec());
        for (std::size_t s = 1; s < m.num_states(); ++s) {
            if (m.is_goal(s)) wide.set_goal(s);
            if (m.is_absorbing(s)) wide.set_absorbing(s);
        }
        for (std::size_t s = 1; s < m.num_states(); ++s)
            for (const auto& ch : m.choices(s)) {
                auto e = ch.edges;
                auto& x = e[rng() % e.size()];
                x.lower *= U01(rng);
                x.upper += (1 - x.upper) * U01(rng);
                wide.add_choice(s, ch.action, e);
            }
        const auto a = robust_value_iteration(m);
        const auto b = robust_value_iteration(wide);
        for (std::size_t s = 0; s < m.num_states(); ++s) ASSERT_LE(b.lambda(s), a.lambda(s) + 1e-12);
    }
}

TEST(RobustValueIteration, MoreTimeNeverHurtsWithAbsorbingGoal) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 50; ++t) {
        const auto m = random_imdp(rng, SpecKind::ReachAvoid);
        const auto pol = robust_value_iteration(m);
        for (int k = 1; k <= m.horizon(); ++k)
            for (std::size_t s = 0; s < m.num_states(); ++s) ASSERT_LE(pol.value(k, s), pol.value(k - 1, s) + 1e-12);
    }
}

TEST(RobustValueIteration, DeterministicTieBreak) {
    IntervalMDP m(3, 2);
    m.set_goal(2);
    m.add_choice(1, 4, {{2, 1, 1}});
    m.add_choice(1, 7, {{2, 1, 1}});
    const auto a = robust_value_iteration(m, 1);
    const auto b = robust_value_iteration(m, 3);
    EXPECT_EQ(a.action(0, 1), 4);
    EXPECT_EQ(a.actions, b.actions);
    EXPECT_EQ(a.values, b.values);
}

TEST(Instantiate, RobustValueIsALowerBound) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U01(0, 1);
    for (int t = 0; t < 20; ++t) {
        const auto m = random_imdp(rng, SpecKind::ReachAvoid);
        const auto pol = robust_value_iteration(m);
        const auto lpr = evaluate_policy(instantiate(m, [](std::size_t, std::size_t, const Choice& ch) { return lower_plus_residual(ch); }), pol);
        for (std::size_t s = 0; s < m.num_states(); ++s) EXPECT_GE(lpr[s] + 1e-12, pol.lambda(s));
        for (int r = 0; r < 100; ++r) {
            // Random feasible point: start from lower bounds, pour the rest in random order.
            const auto mdp = instantiate(m, [&](std::size_t, std::size_t, const Choice& ch) {
                std::vector<double> p(ch.edges.size());
                double rem = 1;
                for (std::size_t e = 0; e < p.size(); ++e) rem -= (p[e] = ch.edges[e].lower);
                std::vector<std::size_t> order(p.size());
                std::iota(order.begin(), order.end(), 0);
                std::shuffle(order.begin(), order.end(), rng);
                for (auto e : order) {
                    const double add = std::min(rem, (ch.edges[e].upper - p[e]) * U01(rng));
                    p[e] += add;
                    rem -= add;
                }
                for (auto e : order) {
                    const double add = std::min(rem, ch.edges[e].upper - p[e]);
                    p[e] += add;
                    rem -= add;
                }
                return p;
            });
            const auto v = evaluate_policy(mdp, pol);
            for (std::size_t s = 0; s < m.num_states(); ++s) ASSERT_GE(v[s] + 1e-12, pol.lambda(s));
        }
    }
}

TEST(Instantiate, WitnessReproducesRobustValueForOneStep) {
    std::mt19937_64 rng(10);
    for (int t = 0; t < 50; ++t) {
        auto m = random_imdp(rng, SpecKind::ReachAvoid);
        m.set_horizon(1);
        const auto pol = robust_value_iteration(m);
        const auto term = terminal_values(m);
        const auto mdp = instantiate(m, [&](std::size_t, std::size_t, const Choice& ch) {
            return worst_case_expectation(ch.edges, term).witness;
        });
        const auto v = evaluate_policy(mdp, pol);
        for (std::size_t s = 0; s < m.num_states(); ++s) EXPECT_NEAR(v[s], pol.lambda(s), 1e-12);
    }
}

TEST(Instantiate, RejectsInfeasibleSelection) {
    const auto m = toy_two_state();
    EXPECT_THROW(instantiate(m, [](std::size_t, std::size_t, const Choice& ch) { return std::vector<double>(ch.edges.size(), 0.0); }),
                 Error);
}

TEST(Export, GoldenTwoStateToy) {
    IntervalMDP m(2, 1);
    m.add_choice(1, 0, {{1, 1, 1}});
    std::ostringstream os;
    export_interval_model(m, os);
    EXPECT_EQ(os.str(),
              "imdp states=2 horizon=1 spec=reach-avoid choices=1 transitions=1\n"
              "goal\n"
              "absorbing 0\n"
              "1 0 1 [1,1]\n");
}

TEST(Export, RoundTrip) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 30; ++t) {
        const auto m = random_imdp(rng, t % 2 ? SpecKind::Safety : SpecKind::ReachAvoid);
        std::stringstream ss;
        export_interval_model(m, ss);
        const auto back = import_interval_model(ss);
        EXPECT_TRUE(back == m);
    }
}

TEST(Export, DroneLineCount) {
    auto c = drone_config();
    c.samples = 2000;
    const auto r = run_pipeline(c);
    std::ostringstream os;
    export_interval_model(r.imdp, os);
    const auto text = os.str();
    EXPECT_EQ(std::size_t(std::count(text.begin(), text.end(), '\n')), 3 + r.imdp.num_transitions());
}

TEST(PolicyCsv, Layout) {
    const auto m = toy_two_state();
    const auto pol = robust_value_iteration(m);
    std::ostringstream os;
    write_policy_csv(pol, os);
    EXPECT_EQ(os.str(), "state,k,action,value\n0,0,-1,0\n1,0,0,0\n");
}
