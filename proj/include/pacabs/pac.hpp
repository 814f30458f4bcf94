#pragma once

// PAC bounds on transition probabilities from sample counts.

#include "pacabs/core.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace pacabs {

struct SampleCounts {
    long N = 0;
    long R = 0;       // samples whose box lies inside the successor region
    long Rtilde = 0;  // samples whose box touches the successor region
};

struct ProbInterval {
    double lower = 0.0;
    double upper = 0.0;
    double beta = 0.0;
    SampleCounts counts{};
    bool widened = false;  // lower exceeded upper numerically and was swapped

    bool empty_edge() const { return upper <= 0.0; }
};

namespace detail {

inline void check_count_args(const char* who, long N, long count, double beta) {
    if (N < 1) fail(std::string(who) + ": N must be >= 1");
    if (count < 0 || count > N) fail(std::string(who) + ": count " + std::to_string(count) + " outside [0, N]");
    if (!(beta > 0.0 && beta < 1.0)) fail(std::string(who) + ": beta must lie in (0,1)");
}

// log C(N, i) for i = 0..N via lgamma.
inline double log_binomial(long N, long i) {
    return std::lgamma(double(N) + 1.0) - std::lgamma(double(i) + 1.0) - std::lgamma(double(N - i) + 1.0);
}

}  // namespace detail

/// log of sum_{i=0}^{k} C(N,i) (1-p)^i p^(N-i), i.e. log P[Bin(N, 1-p) <= k].
/// Terms are summed outward from the largest one and dropped once they fall
/// more than 60 nats below it.
inline double log_binomial_tail(long N, long k, double p) {
    if (k >= N) return 0.0;
    const double lp = std::log(p), lq = std::log1p(-p);
    auto term = [&](long i) { return detail::log_binomial(N, i) + double(i) * lq + double(N - i) * lp; };
    // Mode of Bin(N, 1-p) clipped to [0, k].
    long mode = long(std::floor((double(N) + 1.0) * (1.0 - p)));
    mode = std::clamp(mode, 0L, k);
    const double peak = term(mode);
    double sum = 1.0;
    constexpr double kCut = 60.0;
    for (long i = mode - 1; i >= 0; --i) {
        const double t = term(i) - peak;
        if (t < -kCut) break;
        sum += std::exp(t);
    }
    for (long i = mode + 1; i <= k; ++i) {
        const double t = term(i) - peak;
        if (t < -kCut) break;
        sum += std::exp(t);
    }
    return peak + std::log(sum);
}

/// Lower bound from the scenario approach: the root p in (0,1) of
/// beta/N = sum_{i=0}^{N-R} C(N,i)(1-p)^i p^(N-i); 0 when R = 0.
inline double scenario_lower_bound(long N, long R, double beta) {
    detail::check_count_args("scenario_lower_bound", N, R, beta);
    if (R == 0) return 0.0;
    const double target = std::log(beta / double(N));
    if (R == N) return std::exp(target / double(N));
    const long k = N - R;
    // The tail is increasing in p.
    double lo = 1e-12, hi = 1.0 - 1e-12;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double v = log_binomial_tail(N, k, mid);
        // |exp(v) - e^target| < 1e-9 e^target  <=>  |expm1(v - target)| < 1e-9
        if (std::abs(std::expm1(v - target)) < 1e-10) return mid;
        if (v < target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Hoeffding upper bound min(1, Rtilde/N + sqrt(ln(1/beta) / (2N))).
inline double hoeffding_upper_bound(long N, long Rtilde, double beta) {
    detail::check_count_args("hoeffding_upper_bound", N, Rtilde, beta);
    return std::min(1.0, double(Rtilde) / double(N) + std::sqrt(std::log(1.0 / beta) / (2.0 * double(N))));
}

inline ProbInterval transition_interval(const SampleCounts& c, double beta) {
    require(0 <= c.R && c.R <= c.Rtilde && c.Rtilde <= c.N, "transition_interval: inconsistent counts");
    ProbInterval out;
    out.beta = beta;
    out.counts = c;
    if (c.Rtilde == 0) return out;
    out.lower = scenario_lower_bound(c.N, c.R, beta);
    out.upper = hoeffding_upper_bound(c.N, c.Rtilde, beta);
    if (out.lower > out.upper) {
        std::swap(out.lower, out.upper);
        out.widened = true;
    }
    return out;
}

/// Memoizes scenario bounds for a fixed (N, beta); the same R values recur
/// across thousands of transitions. Thread safe.
class ScenarioBoundCache {
public:
    ScenarioBoundCache(long N, double beta) : N_(N), beta_(beta), values_(std::size_t(N) + 1, -1.0) {
        detail::check_count_args("ScenarioBoundCache", N, 0, beta);
    }

    double lower(long R) const {
        require(R >= 0 && R <= N_, "ScenarioBoundCache: count out of range");
        {
            std::lock_guard lock(mutex_);
            if (values_[std::size_t(R)] >= 0.0) return values_[std::size_t(R)];
        }
        const double v = scenario_lower_bound(N_, R, beta_);
        std::lock_guard lock(mutex_);
        values_[std::size_t(R)] = v;
        return v;
    }

    ProbInterval interval(const SampleCounts& c) const {
        require(c.N == N_, "ScenarioBoundCache: sample count mismatch");
        require(0 <= c.R && c.R <= c.Rtilde && c.Rtilde <= c.N, "transition_interval: inconsistent counts");
        ProbInterval out;
        out.beta = beta_;
        out.counts = c;
        if (c.Rtilde == 0) return out;
        out.lower = lower(c.R);
        out.upper = hoeffding_upper_bound(c.N, c.Rtilde, beta_);
        if (out.lower > out.upper) {
            std::swap(out.lower, out.upper);
            out.widened = true;
        }
        return out;
    }

    long N() const { return N_; }
    double beta() const { return beta_; }

private:
    long N_;
    double beta_;
    mutable std::mutex mutex_;
    mutable std::vector<double> values_;
};

/// Union-bound bookkeeping: every stored interval holds with probability at
/// least 1 - 2 beta, so all of them hold jointly with probability at least
/// 1 - 2 beta * interval_count.
struct ConfidenceLedger {
    double desired_overall_confidence = 0.0;
    std::size_t interval_count = 0;
    double per_interval_beta = 0.0;

    double overall_confidence() const { return 1.0 - 2.0 * per_interval_beta * double(interval_count); }
};

inline ConfidenceLedger allocate_confidence(std::size_t interval_count, double desired_overall) {
    if (!(desired_overall > 0.0 && desired_overall < 1.0)) fail("allocate_confidence: desired confidence must lie in (0,1)");
    if (interval_count == 0) fail("allocate_confidence: no transitions");
    ConfidenceLedger l;
    l.desired_overall_confidence = desired_overall;
    l.interval_count = interval_count;
    l.per_interval_beta = (1.0 - desired_overall) / (2.0 * double(interval_count));
    return l;
}

}  // namespace pacabs
