#pragma once

// Parametric linear stochastic system x+ = A(a) x + B(a) u + c + q + eta,
// where A(a), B(a) are convex combinations of vertex matrices.

#include "pacabs/geometry.hpp"

#include <Eigen/LU>

#include <memory>
#include <optional>
#include <random>
#include <utility>

namespace pacabs {

inline constexpr double kSimplexStoreTol = 1e-12;
inline constexpr double kSimplexUseTol = 1e-9;
inline constexpr double kMaxNominalCondition = 1e12;

/// Source of i.i.d. noise vectors. Either a seeded Gaussian generator or a
/// replay buffer that hands out recorded samples in order (wrapping around
/// is an error, so replayed runs never silently reuse samples).
class NoiseSource {
public:
    static NoiseSource gaussian(Vector mean, Matrix covariance, std::uint64_t seed) {
        require(mean.size() == covariance.rows() && covariance.rows() == covariance.cols(),
                "NoiseSource::gaussian: mean/covariance dimension mismatch");
        require((covariance - covariance.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + covariance.cwiseAbs().maxCoeff()),
                "NoiseSource::gaussian: covariance not symmetric");
        Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance);
        if (eig.eigenvalues().minCoeff() < -1e-12) fail("NoiseSource::gaussian: covariance not positive semidefinite");
        NoiseSource s;
        s.kind_ = Kind::Gaussian;
        s.mean_ = std::move(mean);
        s.covariance_ = covariance;
        s.factor_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
        s.seed_ = seed;
        s.rng_.seed(seed);
        return s;
    }

    static NoiseSource replay(std::vector<Vector> samples) {
        require(!samples.empty(), "NoiseSource::replay: empty buffer");
        NoiseSource s;
        s.kind_ = Kind::Replay;
        s.buffer_ = std::make_shared<const std::vector<Vector>>(std::move(samples));
        s.mean_ = Vector::Zero(s.buffer_->front().size());
        return s;
    }

    /// Zero noise of dimension n (useful for deterministic tests).
    static NoiseSource zero(Eigen::Index n) { return gaussian(Vector::Zero(n), Matrix::Zero(n, n), 0); }

    bool is_gaussian() const { return kind_ == Kind::Gaussian; }
    Eigen::Index dim() const { return mean_.size(); }
    const Vector& mean() const { return mean_; }
    const Matrix& covariance() const { return covariance_; }
    std::uint64_t seed() const { return seed_; }

    /// Independent copy whose generator is seeded from (seed, stream).
    /// Replay sources are returned unchanged.
    NoiseSource fork(std::uint64_t stream) const {
        NoiseSource s = *this;
        if (kind_ == Kind::Gaussian) {
            s.seed_ = split_seed(seed_, stream);
            s.rng_.seed(s.seed_);
        }
        return s;
    }

    Vector draw_one() {
        if (kind_ == Kind::Replay) {
            if (cursor_ >= buffer_->size()) fail("NoiseSource::draw: replay buffer exhausted");
            return (*buffer_)[cursor_++];
        }
        Vector z(dim());
        for (Eigen::Index d = 0; d < dim(); ++d) z[d] = normal_(rng_);
        return mean_ + factor_ * z;
    }

    std::vector<Vector> draw(std::size_t count) {
        std::vector<Vector> out;
        out.reserve(count);
        for (std::size_t k = 0; k < count; ++k) out.push_back(draw_one());
        return out;
    }

private:
    enum class Kind { Gaussian, Replay };
    Kind kind_ = Kind::Gaussian;
    Vector mean_;
    Matrix covariance_;
    Matrix factor_;
    std::uint64_t seed_ = 0;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_;
    std::shared_ptr<const std::vector<Vector>> buffer_;
    std::size_t cursor_ = 0;
};

/// Abstract actions: one target polytope per action plus the point the
/// controller aims at.
struct ActionTargets {
    std::vector<VPolytope> targets;
    std::vector<Vector> representative_points;

    std::size_t size() const { return targets.size(); }

    /// One box target per entry, representative point at the box center.
    static ActionTargets from_boxes(const std::vector<HyperRectangle>& boxes) {
        ActionTargets t;
        t.targets.reserve(boxes.size());
        for (const auto& b : boxes) {
            t.targets.push_back(VPolytope::from_box(b));
            t.representative_points.push_back(b.center());
        }
        return t;
    }

    /// One target per partition cell, each cell scaled around its center by
    /// `scale` (all ones gives the cells themselves).
    static ActionTargets from_partition(const Partition& partition, std::optional<Vector> scale = std::nullopt) {
        std::vector<HyperRectangle> boxes;
        boxes.reserve(partition.size());
        for (const auto& r : partition.regions()) boxes.push_back(scale ? r.scaled(*scale) : r);
        return from_boxes(boxes);
    }

    void validate(Eigen::Index n) const {
        require(targets.size() == representative_points.size(), "ActionTargets: targets/points length mismatch");
        for (std::size_t l = 0; l < targets.size(); ++l) {
            require(targets[l].dim() == n, "ActionTargets: target " + std::to_string(l) + " has wrong dimension");
            require(representative_points[l].size() == n, "ActionTargets: point " + std::to_string(l) + " has wrong dimension");
        }
    }
};

class ParametricLinearModel {
public:
    ParametricLinearModel() = default;

    ParametricLinearModel(std::vector<Matrix> A_list, std::vector<Matrix> B_list, VPolytope control_set,
                          NoiseSource noise, int horizon, std::optional<Vector> alpha_hat = std::nullopt,
                          std::optional<HyperRectangle> disturbance_set = std::nullopt,
                          std::optional<Vector> offset = std::nullopt)
        : A_list_(std::move(A_list)),
          B_list_(std::move(B_list)),
          control_set_(std::move(control_set).canonicalized()),
          disturbance_(std::move(disturbance_set)),
          noise_(std::move(noise)),
          horizon_(horizon) {
        const auto r = A_list_.size();
        require(r >= 1, "ParametricLinearModel: at least one vertex matrix required");
        require(B_list_.size() == r, "ParametricLinearModel: A_list and B_list lengths differ (" +
                                         dims_string(Eigen::Index(r), Eigen::Index(B_list_.size())) + ")");
        n_ = A_list_.front().rows();
        m_ = B_list_.front().cols();
        require(n_ >= 1 && m_ >= 1, "ParametricLinearModel: empty matrices");
        for (std::size_t i = 0; i < r; ++i) {
            require(A_list_[i].rows() == n_ && A_list_[i].cols() == n_,
                    "ParametricLinearModel: A_" + std::to_string(i) + " is not " + std::to_string(n_) + "x" + std::to_string(n_));
            require(B_list_[i].rows() == n_ && B_list_[i].cols() == m_,
                    "ParametricLinearModel: B_" + std::to_string(i) + " has wrong shape");
        }
        require(control_set_.dim() == m_, "ParametricLinearModel: control set dimension mismatch");
        require(noise_.dim() == n_, "ParametricLinearModel: noise dimension mismatch");
        require(horizon_ >= 0, "ParametricLinearModel: negative horizon");
        if (disturbance_) require(disturbance_->dim() == n_, "ParametricLinearModel: disturbance set dimension mismatch");
        offset_ = offset ? *offset : Vector::Zero(n_);
        require(offset_.size() == n_, "ParametricLinearModel: offset dimension mismatch");

        alpha_hat_ = alpha_hat ? *alpha_hat : Vector::Constant(Eigen::Index(r), 1.0 / double(r));
        check_simplex(alpha_hat_, kSimplexStoreTol, "ParametricLinearModel: alpha_hat");
        std::tie(A_hat_, B_hat_) = combine(alpha_hat_);

        Eigen::JacobiSVD<Matrix> svd(A_hat_);
        const auto& sv = svd.singularValues();
        const double cond = sv[n_ - 1] > 0 ? sv[0] / sv[n_ - 1] : std::numeric_limits<double>::infinity();
        if (!(cond <= kMaxNominalCondition))
            throw NumericalError("ParametricLinearModel: nominal A is singular or ill-conditioned (condition " +
                                 std::to_string(cond) + ")");
        lu_ = Eigen::PartialPivLU<Matrix>(A_hat_);

        if (control_set_.vertices().size() > 1 && control_set_.dim() >= 1) {
            // Halfspace form of U for input checks. Flat control sets (fewer
            // points than needed for a full-dimensional hull) fall back to a
            // vertex-membership test.
            try {
                control_hrep_ = vhull_to_hrep(control_set_);
            } catch (const NumericalError&) {
                control_hrep_.reset();
            }
        }
    }

    Eigen::Index n() const { return n_; }
    Eigen::Index m() const { return m_; }
    std::size_t r() const { return A_list_.size(); }
    int horizon() const { return horizon_; }
    const std::vector<Matrix>& A_list() const { return A_list_; }
    const std::vector<Matrix>& B_list() const { return B_list_; }
    const Vector& alpha_hat() const { return alpha_hat_; }
    const Matrix& A_hat() const { return A_hat_; }
    const Matrix& B_hat() const { return B_hat_; }
    const Vector& offset() const { return offset_; }
    const VPolytope& control_set() const { return control_set_; }
    const std::optional<HPolytope>& control_hrep() const { return control_hrep_; }
    const std::optional<HyperRectangle>& disturbance_set() const { return disturbance_; }
    const NoiseSource& noise() const { return noise_; }
    NoiseSource& noise() { return noise_; }

    /// Same model with the parameter uncertainty removed: the only vertex is
    /// the nominal one, so every epistemic-error hull collapses to {0}
    /// (apart from the disturbance box, which is kept).
    ParametricLinearModel without_parameter_uncertainty() const {
        return ParametricLinearModel({A_hat_}, {B_hat_}, control_set_, noise_, horizon_, std::nullopt, disturbance_, offset_);
    }

    ParametricLinearModel with_horizon(int K) const {
        ParametricLinearModel copy = *this;
        require(K >= 0, "ParametricLinearModel: negative horizon");
        copy.horizon_ = K;
        return copy;
    }

    ParametricLinearModel with_noise(NoiseSource noise) const {
        require(noise.dim() == n_, "ParametricLinearModel: noise dimension mismatch");
        ParametricLinearModel copy = *this;
        copy.noise_ = std::move(noise);
        return copy;
    }

    void check_simplex(const Vector& alpha, double tol, const std::string& who) const {
        require(alpha.size() == Eigen::Index(r()), who + ": length " + std::to_string(alpha.size()) +
                                                        " does not match r = " + std::to_string(r()));
        for (Eigen::Index i = 0; i < alpha.size(); ++i)
            if (!(alpha[i] >= -tol)) fail(who + ": negative component " + std::to_string(i));
        if (!(std::abs(alpha.sum() - 1.0) <= tol)) fail(who + ": components do not sum to 1");
    }

    std::pair<Matrix, Matrix> combine(const Vector& alpha) const {
        check_simplex(alpha, kSimplexUseTol, "combine: alpha");
        Matrix A = Matrix::Zero(n_, n_), B = Matrix::Zero(n_, m_);
        for (std::size_t i = 0; i < r(); ++i) {
            A += alpha[Eigen::Index(i)] * A_list_[i];
            B += alpha[Eigen::Index(i)] * B_list_[i];
        }
        return {std::move(A), std::move(B)};
    }

    /// Nominal noise-free successor A(a^)x + B(a^)u + c.
    Vector nominal_image(const Vector& x, const Vector& u) const { return A_hat_ * x + B_hat_ * u + offset_; }

    /// Solves A(a^) x = rhs with the cached factorization.
    Vector solve_nominal(const Vector& rhs) const { return lu_.solve(rhs); }

    /// States from which some u in U drives the nominal model into the target:
    /// conv of the solutions of A^ x = t_i - B^ u_j - c over all vertex pairs.
    VPolytope backward_reach_set(const VPolytope& target) const {
        require(target.dim() == n_, "backward_reach_set: target dimension mismatch");
        const auto& T = target.vertices();
        const auto& U = control_set_.vertices();
        Matrix rhs(n_, Eigen::Index(T.size() * U.size()));
        Eigen::Index col = 0;
        for (const auto& t : T)
            for (const auto& u : U) rhs.col(col++) = t - B_hat_ * u - offset_;
        const Matrix X = lu_.solve(rhs);
        std::vector<Vector> verts;
        verts.reserve(std::size_t(X.cols()));
        for (Eigen::Index k = 0; k < X.cols(); ++k) verts.emplace_back(X.col(k));
        return VPolytope(std::move(verts)).canonicalized();
    }

    VPolytope backward_reach_set(const ActionTargets& targets, std::size_t action) const {
        require(action < targets.size(), "backward_reach_set: action index out of range");
        return backward_reach_set(targets.targets[action]);
    }

    /// Over-approximating hull of the epistemic error (A_i - A^)x + (B_i - B^)u
    /// over the region and U, extended by the disturbance box when present.
    VPolytope epistemic_error_hull(const HyperRectangle& region) const {
        require(region.dim() == n_, "epistemic_error_hull: region dimension mismatch (" + dims_string(region.dim(), n_) + ")");
        const auto X = region.vertices();
        const auto& U = control_set_.vertices();
        std::vector<Vector> verts;
        verts.reserve(r() * X.size() * U.size());
        for (std::size_t i = 0; i < r(); ++i) {
            const Matrix dA = A_list_[i] - A_hat_;
            const Matrix dB = B_list_[i] - B_hat_;
            for (const auto& x : X) {
                const Vector ax = dA * x;
                for (const auto& u : U) verts.emplace_back(ax + dB * u);
            }
        }
        VPolytope hull = VPolytope(std::move(verts)).canonicalized();
        if (!disturbance_) return hull;
        std::vector<Vector> summed;
        const auto Q = disturbance_->vertices();
        for (const auto& v : hull.vertices())
            for (const auto& q : Q) summed.push_back(v + q);
        return VPolytope(std::move(summed)).canonicalized();
    }

    /// Bounding box of the epistemic error hull, computed per dimension
    /// without materializing the hull (same min/max over the same vertices).
    HyperRectangle epistemic_error_box(const HyperRectangle& region) const {
        require(region.dim() == n_, "epistemic_error_box: region dimension mismatch");
        Vector lo = Vector::Constant(n_, std::numeric_limits<double>::infinity());
        Vector hi = -lo;
        const auto& U = control_set_.vertices();
        for (std::size_t i = 0; i < r(); ++i) {
            const Matrix dA = A_list_[i] - A_hat_;
            const Matrix dB = B_list_[i] - B_hat_;
            // min/max of dA x over the box separates by coordinate.
            Vector axlo = Vector::Zero(n_), axhi = Vector::Zero(n_);
            for (Eigen::Index row = 0; row < n_; ++row)
                for (Eigen::Index d = 0; d < n_; ++d) {
                    const double a = dA(row, d);
                    const double p = a * region.lower()[d], q = a * region.upper()[d];
                    axlo[row] += std::min(p, q);
                    axhi[row] += std::max(p, q);
                }
            for (const auto& u : U) {
                const Vector bu = dB * u;
                lo = lo.cwiseMin(axlo + bu);
                hi = hi.cwiseMax(axhi + bu);
            }
        }
        HyperRectangle box(lo, hi);
        return disturbance_ ? box + *disturbance_ : box;
    }

    bool input_admissible(const Vector& u, double tol = 1e-7) const {
        require(u.size() == m_, "input_admissible: dimension mismatch");
        if (control_hrep_) return control_hrep_->contains(u, tol);
        // Flat control set: accept exact vertices or points on a segment
        // between two vertices (covers singleton and 1-D segment sets).
        const auto& V = control_set_.vertices();
        for (const auto& v : V)
            if ((v - u).cwiseAbs().maxCoeff() <= tol) return true;
        for (std::size_t a = 0; a < V.size(); ++a)
            for (std::size_t b = a + 1; b < V.size(); ++b) {
                const Vector d = V[b] - V[a];
                const double t = std::clamp(d.dot(u - V[a]) / d.squaredNorm(), 0.0, 1.0);
                if ((V[a] + t * d - u).cwiseAbs().maxCoeff() <= tol) return true;
            }
        return false;
    }

    /// One step of the true dynamics under parameter alpha.
    Vector step(const Vector& x, const Vector& u, const Vector& alpha, const Vector& eta,
                const std::optional<Vector>& q = std::nullopt) const {
        require(x.size() == n_ && eta.size() == n_, "step: state/noise dimension mismatch");
        if (!input_admissible(u)) fail("step: input outside control polytope");
        const auto [A, B] = combine(alpha);
        Vector next = A * x + B * u + offset_ + eta;
        if (q) {
            require(q->size() == n_, "step: disturbance dimension mismatch");
            if (!disturbance_ || !disturbance_->contains(*q, 1e-9)) fail("step: disturbance outside Q");
            next += *q;
        }
        return next;
    }

private:
    std::vector<Matrix> A_list_;
    std::vector<Matrix> B_list_;
    VPolytope control_set_;
    std::optional<HPolytope> control_hrep_;
    std::optional<HyperRectangle> disturbance_;
    NoiseSource noise_;
    int horizon_ = 0;
    Eigen::Index n_ = 0;
    Eigen::Index m_ = 0;
    Vector alpha_hat_;
    Vector offset_;
    Matrix A_hat_;
    Matrix B_hat_;
    Eigen::PartialPivLU<Matrix> lu_;
};

}  // namespace pacabs
