#pragma once

// Dense two-phase simplex with Bland's rule. Independent of the library's
// geometry and VI code; only meant for the tiny problems the tests build.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct LpResult {
    bool feasible = false;
    bool bounded = true;
    double value = 0.0;
    Vec x;
};

namespace detail {

// Tableau rows 0..m-1 are constraints, row m the objective (reduced costs,
// rhs holds -objective). Returns false when unbounded.
inline bool run_simplex(Mat& T, std::vector<int>& basis, int usable_cols, double eps) {
    const int m = int(T.rows()) - 1;
    const int rhs = int(T.cols()) - 1;
    for (int iter = 0; iter < 100000; ++iter) {
        int enter = -1;
        for (int j = 0; j < usable_cols; ++j)
            if (T(m, j) < -eps) {
                enter = j;
                break;
            }
        if (enter < 0) return true;
        int leave = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m; ++i) {
            if (T(i, enter) > eps) {
                const double ratio = T(i, rhs) / T(i, enter);
                if (ratio < best - 1e-15 || (std::abs(ratio - best) <= 1e-15 && leave >= 0 && basis[i] < basis[leave])) {
                    best = ratio;
                    leave = i;
                }
            }
        }
        if (leave < 0) return false;
        T.row(leave) /= T(leave, enter);
        for (int i = 0; i <= m; ++i)
            if (i != leave && T(i, enter) != 0.0) T.row(i) -= T(i, enter) * T.row(leave);
        basis[leave] = enter;
    }
    return true;
}

}  // namespace detail

/// minimize c'x  s.t.  Aeq x = beq,  Aub x <= bub,  x >= 0.
inline LpResult simplex(const Vec& c, const Mat& Aeq, const Vec& beq, const Mat& Aub, const Vec& bub, double eps = 1e-11) {
    const int n = int(c.size());
    const int me = int(Aeq.rows()), mu = int(Aub.rows());
    const int m = me + mu;
    const int nv = n + mu;            // structural + slack
    const int cols = nv + m + 1;      // + artificials + rhs
    Mat T = Mat::Zero(m + 1, cols);
    std::vector<int> basis(std::size_t(m), 0);
    for (int i = 0; i < me; ++i) {
        T.block(i, 0, 1, n) = Aeq.row(i);
        T(i, cols - 1) = beq[i];
    }
    for (int i = 0; i < mu; ++i) {
        T.block(me + i, 0, 1, n) = Aub.row(i);
        T(me + i, n + i) = 1.0;
        T(me + i, cols - 1) = bub[i];
    }
    for (int i = 0; i < m; ++i) {
        if (T(i, cols - 1) < 0) T.row(i) *= -1.0;
        T(i, nv + i) = 1.0;
        basis[std::size_t(i)] = nv + i;
    }
    // Phase 1: minimize the sum of artificials.
    for (int i = 0; i < m; ++i) T.row(m) -= T.row(i);
    for (int i = 0; i < m; ++i) T(m, nv + i) = 0.0;
    detail::run_simplex(T, basis, nv + m, eps);
    LpResult res;
    const double scale = 1.0 + (m ? std::max(beq.size() ? beq.cwiseAbs().maxCoeff() : 0.0, bub.size() ? bub.cwiseAbs().maxCoeff() : 0.0) : 0.0);
    if (-T(m, cols - 1) > 1e-9 * scale) return res;
    res.feasible = true;
    // Drive remaining artificials out of the basis.
    for (int i = 0; i < m; ++i) {
        if (basis[std::size_t(i)] < nv) continue;
        for (int j = 0; j < nv; ++j)
            if (std::abs(T(i, j)) > 1e-9) {
                T.row(i) /= T(i, j);
                for (int k = 0; k <= m; ++k)
                    if (k != i && T(k, j) != 0.0) T.row(k) -= T(k, j) * T.row(i);
                basis[std::size_t(i)] = j;
                break;
            }
    }
    // Phase 2 objective in reduced form.
    T.row(m).setZero();
    for (int j = 0; j < n; ++j) T(m, j) = c[j];
    for (int i = 0; i < m; ++i) {
        const int b = basis[std::size_t(i)];
        if (b < nv && T(m, b) != 0.0) T.row(m) -= T(m, b) * T.row(i);
    }
    if (!detail::run_simplex(T, basis, nv, eps)) {
        res.bounded = false;
        return res;
    }
    res.x = Vec::Zero(n);
    for (int i = 0; i < m; ++i)
        if (basis[std::size_t(i)] < n) res.x[basis[std::size_t(i)]] = T(i, cols - 1);
    res.value = c.dot(res.x);
    return res;
}

/// min sum p_j v_j over lower <= p <= upper, sum p = 1.
inline LpResult min_expectation(const std::vector<double>& lower, const std::vector<double>& upper,
                                const std::vector<double>& values) {
    const int k = int(values.size());
    Vec c(k);
    for (int j = 0; j < k; ++j) c[j] = values[std::size_t(j)];
    Mat Aeq = Mat::Ones(1, k);
    Vec beq = Vec::Ones(1);
    Mat Aub(2 * k, k);
    Aub.setZero();
    Vec bub(2 * k);
    for (int j = 0; j < k; ++j) {
        Aub(j, j) = 1.0;
        bub[j] = upper[std::size_t(j)];
        Aub(k + j, j) = -1.0;
        bub[k + j] = -lower[std::size_t(j)];
    }
    return simplex(c, Aeq, beq, Aub, bub);
}

/// Is x a convex combination of the points (up to `tol` per coordinate)?
inline bool in_convex_hull(const std::vector<Vec>& points, const Vec& x, double tol = 1e-9) {
    const int k = int(points.size()), n = int(x.size());
    Mat Aeq = Mat::Ones(1, k);
    Vec beq = Vec::Ones(1);
    Mat Aub(2 * n, k);
    Vec bub(2 * n);
    for (int j = 0; j < k; ++j)
        for (int d = 0; d < n; ++d) {
            Aub(d, j) = points[std::size_t(j)][d];
            Aub(n + d, j) = -points[std::size_t(j)][d];
        }
    for (int d = 0; d < n; ++d) {
        bub[d] = x[d] + tol;
        bub[n + d] = -x[d] + tol;
    }
    return simplex(Vec::Zero(k), Aeq, beq, Aub, bub).feasible;
}

/// Does some u in conv(U) put A x + B u + c inside the box [lo, hi]?
inline bool reach_feasible(const Mat& A, const Mat& B, const Vec& c, const Vec& x, const std::vector<Vec>& U,
                           const Vec& lo, const Vec& hi, double tol = 1e-9) {
    const int q = int(U.size()), n = int(x.size());
    Mat BU(n, q);
    for (int j = 0; j < q; ++j) BU.col(j) = B * U[std::size_t(j)];
    const Vec ax = A * x + c;
    Mat Aeq = Mat::Ones(1, q);
    Vec beq = Vec::Ones(1);
    Mat Aub(2 * n, q);
    Vec bub(2 * n);
    Aub.topRows(n) = BU;
    Aub.bottomRows(n) = -BU;
    bub.head(n) = (hi - ax).array() + tol;
    bub.tail(n) = (ax - lo).array() + tol;
    return simplex(Vec::Zero(q), Aeq, beq, Aub, bub).feasible;
}

}  // namespace oracle
