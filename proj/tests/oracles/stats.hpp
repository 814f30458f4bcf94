#pragma once

// Reference probabilities computed independently of the library.

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/binomial.hpp>

#include <cmath>

namespace oracle {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// P[a <= X <= b] for X ~ N(mu, sigma^2).
inline double normal_interval(double a, double b, double mu, double sigma) {
    return normal_cdf((b - mu) / sigma) - normal_cdf((a - mu) / sigma);
}

/// sum_{i=0}^{k} C(N,i) (1-p)^i p^(N-i) via the regularized incomplete beta:
/// P[Bin(N, 1-p) <= k] = I_p(N-k, k+1).
inline double binomial_tail(long N, long k, double p) {
    if (k >= N) return 1.0;
    return boost::math::ibeta(double(N - k), double(k + 1), p);
}

/// The same sum term by term; only usable for small N.
inline double binomial_tail_direct(long N, long k, double p) {
    double s = 0.0;
    for (long i = 0; i <= k; ++i)
        s += boost::math::binomial_coefficient<double>(unsigned(N), unsigned(i)) * std::pow(1.0 - p, double(i)) *
             std::pow(p, double(N - i));
    return s;
}

}  // namespace oracle
