#pragma once

// Online controller, closed-loop simulation and Monte-Carlo evaluation.

#include "pacabs/abstraction.hpp"
#include "pacabs/imdp.hpp"

#include <cmath>
#include <ostream>
#include <string>

namespace pacabs {

inline constexpr double kKktTol = 1e-8;

/// Dense convex QP  min 1/2 u'Pu - f'u  s.t.  G u <= g, solved by
/// enumerating active sets of size <= m (inputs are low dimensional).
struct QpResult {
    Vector u;
    bool feasible = false;
    Vector multipliers;  // one per row of G
};

inline QpResult solve_small_qp(const Matrix& P, const Vector& f, const Matrix& G, const Vector& g, double feas_tol = 1e-9) {
    const auto m = P.rows();
    const auto p = G.rows();
    QpResult best;
    double best_obj = std::numeric_limits<double>::infinity();
    auto objective = [&](const Vector& u) { return 0.5 * u.dot(P * u) - f.dot(u); };
    const double scale = 1.0 + (g.size() ? g.cwiseAbs().maxCoeff() : 0.0);

    std::vector<int> active;
    // Iterate subsets of rows of size 0..m in order of size, lexicographic.
    for (Eigen::Index size = 0; size <= std::min(m, p); ++size) {
        std::vector<int> idx(static_cast<std::size_t>(size));
        std::iota(idx.begin(), idx.end(), 0);
        for (;;) {
            Matrix kkt = Matrix::Zero(m + size, m + size);
            Vector rhs(m + size);
            kkt.topLeftCorner(m, m) = P;
            rhs.head(m) = f;
            for (Eigen::Index k = 0; k < size; ++k) {
                kkt.block(0, m + k, m, 1) = G.row(idx[std::size_t(k)]).transpose();
                kkt.block(m + k, 0, 1, m) = G.row(idx[std::size_t(k)]);
                rhs[m + k] = g[idx[std::size_t(k)]];
            }
            Eigen::FullPivLU<Matrix> lu(kkt);
            if (lu.isInvertible()) {
                const Vector sol = lu.solve(rhs);
                const Vector u = sol.head(m);
                // KKT: P u - f + G_A' mu = 0 with mu >= 0 in this sign convention.
                const Vector mu = sol.tail(size);
                bool ok = (mu.size() == 0 || mu.minCoeff() >= -1e-10);
                if (ok && p > 0) ok = (G * u - g).maxCoeff() <= feas_tol * scale;
                if (ok) {
                    const double obj = objective(u);
                    if (obj < best_obj - 1e-14 * (1.0 + std::abs(obj))) {
                        best_obj = obj;
                        best.u = u;
                        best.feasible = true;
                        best.multipliers = Vector::Zero(p);
                        for (Eigen::Index k = 0; k < size; ++k) best.multipliers[idx[std::size_t(k)]] = mu[k];
                    }
                }
            }
            Eigen::Index k = size - 1;
            while (k >= 0 && idx[std::size_t(k)] == int(p - size + k)) --k;
            if (k < 0) break;
            ++idx[std::size_t(k)];
            for (Eigen::Index j = k + 1; j < size; ++j) idx[std::size_t(j)] = idx[std::size_t(j - 1)] + 1;
        }
    }
    return best;
}

/// Maximum violation of the KKT conditions of the QP at (u, mu).
inline double kkt_residual(const Matrix& P, const Vector& f, const Matrix& G, const Vector& g, const Vector& u,
                           const Vector& mu) {
    double r = (P * u - f + G.transpose() * mu).cwiseAbs().maxCoeff();
    if (G.rows() > 0) {
        r = std::max(r, std::max(0.0, (G * u - g).maxCoeff()));
        r = std::max(r, std::max(0.0, -mu.minCoeff()));
        r = std::max(r, (mu.array() * (G * u - g).array()).abs().maxCoeff());
    }
    return r;
}

/// Computes inputs u = argmin ||A^x + B^u + c - t_l|| subject to u in U and
/// A^x + B^u + c in T_l. Per-action constraint data is prepared once.
class Controller {
public:
    Controller(const ParametricLinearModel& model, const ActionTargets& targets) : model_(&model) {
        targets.validate(model.n());
        const auto& U = model.control_set();
        if (U.vertices().size() == 1) {
            singleton_ = U.vertices().front();
        } else {
            const auto& h = model.control_hrep();
            if (!h) fail("Controller: control set must be a single point or full-dimensional");
            GU_ = h->normals();
            gU_ = h->offsets();
        }
        P_ = model.B_hat().transpose() * model.B_hat();
        actions_.resize(targets.size());
        for (std::size_t l = 0; l < targets.size(); ++l) {
            auto& a = actions_[l];
            const auto H = vhull_to_hrep(targets.targets[l]);
            a.HB = H.normals() * model.B_hat();
            a.HA = H.normals() * model.A_hat();
            a.h = H.offsets() - H.normals() * model.offset();
            a.t = targets.representative_points[l];
        }
    }

    struct Solve {
        Vector u;
        double kkt = 0.0;
    };

    Vector control_input(const Vector& x, std::size_t action) const { return solve(x, action).u; }

    Solve solve(const Vector& x, std::size_t action) const {
        require(action < actions_.size(), "control_input: action index out of range");
        const auto& a = actions_[action];
        const Vector d = a.t - model_->A_hat() * x - model_->offset();
        const Vector hx = a.h - a.HA * x;
        if (singleton_) {
            if ((a.HB * *singleton_ - hx).maxCoeff() > 1e-7 * (1.0 + hx.cwiseAbs().maxCoeff()))
                throw NumericalError("control_input: precondition violated: state outside backward reach set");
            return {*singleton_, 0.0};
        }
        const Vector f = model_->B_hat().transpose() * d;
        const auto m = model_->m();
        const double tol = 1e-7 * (1.0 + hx.cwiseAbs().maxCoeff() + gU_.cwiseAbs().maxCoeff());
        if (m == 1) {
            // Scalar input: the feasible set is an interval; clamp the
            // unconstrained minimizer into it.
            double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
            auto add = [&](double coef, double rhs) {
                if (coef > 0) hi = std::min(hi, rhs / coef);
                else if (coef < 0) lo = std::max(lo, rhs / coef);
                else if (rhs < -tol) lo = std::numeric_limits<double>::infinity();
            };
            for (Eigen::Index r = 0; r < GU_.rows(); ++r) add(GU_(r, 0), gU_[r]);
            for (Eigen::Index r = 0; r < a.HB.rows(); ++r) add(a.HB(r, 0), hx[r]);
            if (lo > hi) {
                // Tolerate round-off on the boundary of the reach set.
                const Vector probe = Vector::Constant(1, 0.5 * (lo + hi));
                if (lo - hi > 1e-9 * (1.0 + std::abs(lo)) || !feasible(a, hx, probe, tol))
                    throw NumericalError("control_input: precondition violated: state outside backward reach set");
                return {probe, 0.0};
            }
            const double p = P_(0, 0);
            double u = p > 0 ? f[0] / p : 0.5 * (std::max(lo, -1e300) + std::min(hi, 1e300));
            u = std::clamp(u, lo, hi);
            return {Vector::Constant(1, u), 0.0};
        }
        // Fast path: unconstrained least squares.
        Eigen::LDLT<Matrix> ldlt(P_);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
            const Vector u0 = ldlt.solve(f);
            if (feasible(a, hx, u0, tol)) return {u0, (P_ * u0 - f).cwiseAbs().maxCoeff()};
        }
        Matrix G(GU_.rows() + a.HB.rows(), m);
        Vector g(G.rows());
        G << GU_, a.HB;
        g << gU_, hx;
        const auto qp = solve_small_qp(P_, f, G, g, 1e-9);
        if (!qp.feasible) throw NumericalError("control_input: precondition violated: state outside backward reach set");
        return {qp.u, kkt_residual(P_, f, G, g, qp.u, qp.multipliers)};
    }

    /// True iff the nominal image of (x, u) lies in the target of `action`.
    bool reaches_target(const Vector& x, const Vector& u, std::size_t action, double tol = 1e-7) const {
        const auto& a = actions_.at(action);
        const Vector hx = a.h - a.HA * x;
        return (a.HB * u - hx).maxCoeff() <= tol * (1.0 + hx.cwiseAbs().maxCoeff());
    }

    const ParametricLinearModel& model() const { return *model_; }

private:
    struct ActionData {
        Matrix HB;  // target normals * B^
        Matrix HA;  // target normals * A^
        Vector h;   // target offsets - normals * c
        Vector t;   // representative point
    };

    bool feasible(const ActionData& a, const Vector& hx, const Vector& u, double tol) const {
        if (GU_.rows() && (GU_ * u - gU_).maxCoeff() > tol) return false;
        return (a.HB * u - hx).maxCoeff() <= tol;
    }

    const ParametricLinearModel* model_;
    std::optional<Vector> singleton_;
    Matrix GU_;
    Vector gU_;
    Matrix P_;
    std::vector<ActionData> actions_;
};

enum class Outcome { ReachedGoal, LeftSafeSet, HorizonExpired, NoEnabledAction };

inline const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::ReachedGoal: return "ReachedGoal";
        case Outcome::LeftSafeSet: return "LeftSafeSet";
        case Outcome::HorizonExpired: return "HorizonExpired";
        case Outcome::NoEnabledAction: return "NoEnabledAction";
    }
    return "?";
}

struct ClosedLoopTrace {
    std::vector<Vector> states;
    std::vector<Vector> inputs;
    Outcome outcome = Outcome::HorizonExpired;
    int final_step = 0;

    bool success(SpecKind spec) const {
        return spec == SpecKind::ReachAvoid ? outcome == Outcome::ReachedGoal : outcome == Outcome::HorizonExpired;
    }
};

/// Everything the online loop needs, bundled by reference.
struct ClosedLoop {
    const ParametricLinearModel& model;
    const Partition& partition;
    const Controller& controller;
    const PolicyTable& policy;
    SpecKind spec = SpecKind::ReachAvoid;
    /// Checks that every nominal image lands in its target (feasibility
    /// chain); throws on violation.
    bool check_feasibility = true;
};

using DisturbanceSchedule = std::function<Vector(int k, const Vector& x)>;

inline ClosedLoopTrace simulate_closed_loop(const ClosedLoop& loop, const Vector& true_alpha, const Vector& x0,
                                            NoiseSource& noise, const DisturbanceSchedule& q_schedule = nullptr) {
    const auto& model = loop.model;
    const auto& part = loop.partition;
    const int K = loop.policy.horizon;
    ClosedLoopTrace tr;
    tr.states.push_back(x0);
    Vector x = x0;
    std::optional<Vector> q_default;
    if (model.disturbance_set()) q_default = model.disturbance_set()->center();
    const auto [A, B] = model.combine(true_alpha);
    for (int k = 0;; ++k) {
        const std::size_t s = part.locate(x);
        tr.final_step = k;
        if (part.is_failure(s)) {
            tr.outcome = Outcome::LeftSafeSet;
            return tr;
        }
        if (loop.spec == SpecKind::ReachAvoid && part.is_goal(s)) {
            tr.outcome = Outcome::ReachedGoal;
            return tr;
        }
        if (k == K) {
            tr.outcome = Outcome::HorizonExpired;
            return tr;
        }
        const int a = loop.policy.action(k, s);
        if (a < 0) {
            tr.outcome = Outcome::NoEnabledAction;
            return tr;
        }
        const Vector u = loop.controller.control_input(x, std::size_t(a));
        if (loop.check_feasibility) {
            if (!model.input_admissible(u)) throw Error("simulate_closed_loop: controller produced input outside U");
            if (!loop.controller.reaches_target(x, u, std::size_t(a)))
                throw Error("simulate_closed_loop: nominal image outside target of action " + std::to_string(a));
        }
        Vector next = A * x + B * u + model.offset() + noise.draw_one();
        if (q_schedule) next += q_schedule(k, x);
        else if (q_default) next += *q_default;
        tr.inputs.push_back(u);
        tr.states.push_back(next);
        x = std::move(next);
    }
}

/// One row per step: k, state, input (empty on the last row), outcome.
inline void write_trace_csv(const ClosedLoopTrace& tr, std::ostream& os) {
    const auto n = tr.states.front().size();
    const auto m = tr.inputs.empty() ? Eigen::Index(0) : tr.inputs.front().size();
    os << 'k';
    for (Eigen::Index d = 0; d < n; ++d) os << ",x" << d;
    for (Eigen::Index d = 0; d < m; ++d) os << ",u" << d;
    os << ",outcome\n";
    char buf[64];
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
        os << k;
        for (Eigen::Index d = 0; d < n; ++d) {
            std::snprintf(buf, sizeof buf, ",%.17g", tr.states[k][d]);
            os << buf;
        }
        for (Eigen::Index d = 0; d < m; ++d) {
            if (k < tr.inputs.size()) std::snprintf(buf, sizeof buf, ",%.17g", tr.inputs[k][d]);
            else std::snprintf(buf, sizeof buf, ",");
            os << buf;
        }
        os << ',' << (k + 1 == tr.states.size() ? to_string(tr.outcome) : "") << '\n';
    }
}

struct ProportionEstimate {
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    long successes = 0;
    long trials = 0;
};

/// Wilson score interval; z = 2.5758 gives two-sided 99%.
inline ProportionEstimate wilson_interval(long successes, long trials, double z = 2.5758293035489004) {
    require(trials >= 1, "wilson_interval: trials must be >= 1");
    ProportionEstimate e;
    e.successes = successes;
    e.trials = trials;
    const double n = double(trials), ph = double(successes) / n;
    e.estimate = ph;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (ph + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n)) / denom;
    e.lower = std::max(0.0, center - half);
    e.upper = std::min(1.0, center + half);
    if (successes == trials) e.upper = 1.0;
    if (successes == 0) e.lower = 0.0;
    return e;
}

inline ProportionEstimate monte_carlo_reach_avoid(const ClosedLoop& loop, const Vector& true_alpha, const Vector& x0,
                                                  long trials, std::uint64_t seed, unsigned workers = 0) {
    require(trials >= 1, "monte_carlo_reach_avoid: trials must be >= 1");
    std::vector<char> ok(std::size_t(trials), 0);
    parallel_for(std::size_t(trials), [&](std::size_t t) {
        NoiseSource noise = loop.model.noise().fork(split_seed(seed, t));
        ok[t] = simulate_closed_loop(loop, true_alpha, x0, noise).success(loop.spec) ? 1 : 0;
    }, workers);
    long succ = 0;
    for (char c : ok) succ += c;
    return wilson_interval(succ, trials);
}

struct SafetyFractionRow {
    double parameter = 0.0;  // caller-defined label, e.g. the mass
    std::size_t states_tested = 0;
    std::size_t states_unsafe = 0;
    double fraction_safe = 1.0;
};

/// For each parameter and each region (center as initial state) with
/// lambda > 0, a controller is unsafe when the 99% upper confidence limit of
/// its empirical satisfaction probability is below lambda.
inline std::vector<SafetyFractionRow> safety_fraction_experiment(const ClosedLoop& loop, const std::vector<double>& labels,
                                                                 const std::vector<Vector>& alphas, long trials,
                                                                 std::uint64_t seed, unsigned workers = 0,
                                                                 std::vector<std::vector<ProportionEstimate>>* detail = nullptr) {
    require(labels.size() == alphas.size(), "safety_fraction_experiment: labels/alphas length mismatch");
    std::vector<std::size_t> states;
    for (std::size_t s = 1; s < loop.policy.num_states; ++s)
        if (loop.policy.lambda(s) > 0.0) states.push_back(s);
    std::vector<SafetyFractionRow> rows;
    if (detail) detail->assign(alphas.size(), {});
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        SafetyFractionRow row;
        row.parameter = labels[a];
        row.states_tested = states.size();
        std::vector<ProportionEstimate> est(states.size());
        parallel_for(states.size(), [&](std::size_t k) {
            const auto s = states[k];
            est[k] = monte_carlo_reach_avoid(loop, alphas[a], loop.partition.region(s).center(), trials,
                                             split_seed(split_seed(seed, a), s), 1);
        }, workers);
        for (std::size_t k = 0; k < states.size(); ++k)
            if (est[k].upper < loop.policy.lambda(states[k])) ++row.states_unsafe;
        row.fraction_safe = states.empty() ? 1.0 : 1.0 - double(row.states_unsafe) / double(states.size());
        if (detail) (*detail)[a] = std::move(est);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace pacabs
