#pragma once

// Low-dimensional convex geometry used by the abstraction: boxes, vertex and
// halfspace polytopes, rectangular grid partitions.

#include "pacabs/core.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace pacabs {

/// Absolute tolerance on halfspace residuals. Points on a boundary count as
/// inside (closed-set semantics).
inline constexpr double kContainmentTol = 1e-9;

/// Largest dimension for which vhull_to_hrep is supported.
inline constexpr int kMaxHullDimension = 6;

class HyperRectangle {
public:
    HyperRectangle() = default;
    HyperRectangle(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
        require(lower_.size() == upper_.size(),
                "HyperRectangle: bound dimensions differ (" + dims_string(lower_.size(), upper_.size()) + ")");
        for (Eigen::Index d = 0; d < lower_.size(); ++d) {
            require(!(lower_[d] > upper_[d]) && !std::isnan(lower_[d]) && !std::isnan(upper_[d]),
                    "HyperRectangle: lower > upper in dimension " + std::to_string(d));
        }
    }

    static HyperRectangle point(const Vector& p) { return {p, p}; }

    /// Box that is unbounded in every dimension.
    static HyperRectangle unbounded(Eigen::Index n) {
        const double inf = std::numeric_limits<double>::infinity();
        return {Vector::Constant(n, -inf), Vector::Constant(n, inf)};
    }

    Eigen::Index dim() const { return lower_.size(); }
    const Vector& lower() const { return lower_; }
    const Vector& upper() const { return upper_; }
    Vector center() const { return 0.5 * (lower_ + upper_); }
    Vector width() const { return upper_ - lower_; }
    double volume() const { return width().prod(); }

    bool contains(const Vector& x, double tol = 0.0) const {
        require(x.size() == dim(), "HyperRectangle::contains: dimension mismatch");
        for (Eigen::Index d = 0; d < dim(); ++d)
            if (x[d] < lower_[d] - tol || x[d] > upper_[d] + tol) return false;
        return true;
    }

    HyperRectangle translated(const Vector& offset) const { return {lower_ + offset, upper_ + offset}; }

    /// Minkowski sum of two boxes.
    HyperRectangle operator+(const HyperRectangle& other) const {
        require(other.dim() == dim(), "HyperRectangle::operator+: dimension mismatch");
        return {lower_ + other.lower_, upper_ + other.upper_};
    }

    /// Box scaled by per-dimension factors around its center.
    HyperRectangle scaled(const Vector& factors) const {
        require(factors.size() == dim(), "HyperRectangle::scaled: dimension mismatch");
        const Vector c = center();
        const Vector half = 0.5 * width().cwiseProduct(factors);
        return {c - half, c + half};
    }

    /// All 2^n corner points, bit d of the index selecting upper in dimension d.
    std::vector<Vector> vertices() const {
        const auto n = dim();
        require(n < 24, "HyperRectangle::vertices: dimension too large");
        std::vector<Vector> out;
        out.reserve(std::size_t(1) << n);
        for (std::size_t mask = 0; mask < (std::size_t(1) << n); ++mask) {
            Vector v(n);
            for (Eigen::Index d = 0; d < n; ++d) v[d] = (mask >> d) & 1u ? upper_[d] : lower_[d];
            out.push_back(std::move(v));
        }
        return out;
    }

    bool operator==(const HyperRectangle& o) const {
        return dim() == o.dim() && lower_ == o.lower_ && upper_ == o.upper_;
    }

private:
    Vector lower_;
    Vector upper_;
};

inline std::string to_string(const HyperRectangle& box) {
    std::ostringstream os;
    for (Eigen::Index d = 0; d < box.dim(); ++d) {
        if (d) os << " x ";
        os << '[' << box.lower()[d] << ',' << box.upper()[d] << ']';
    }
    return os.str();
}

/// Convex hull of a finite point set.
class VPolytope {
public:
    VPolytope() = default;
    explicit VPolytope(std::vector<Vector> vertices) : vertices_(std::move(vertices)) {
        require(!vertices_.empty(), "VPolytope: at least one vertex required");
        const auto n = vertices_.front().size();
        for (const auto& v : vertices_)
            require(v.size() == n, "VPolytope: vertices of mixed dimension");
    }
    static VPolytope from_box(const HyperRectangle& box) { return VPolytope(box.vertices()); }

    Eigen::Index dim() const { return vertices_.front().size(); }
    const std::vector<Vector>& vertices() const { return vertices_; }

    /// Copy with exact duplicate vertices removed, first occurrence kept.
    VPolytope canonicalized() const {
        std::vector<Vector> unique;
        for (const auto& v : vertices_) {
            bool seen = false;
            for (const auto& u : unique)
                if (u == v) { seen = true; break; }
            if (!seen) unique.push_back(v);
        }
        return VPolytope(std::move(unique));
    }

    /// Mean of the distinct vertices; always inside the hull.
    Vector centroid() const {
        const auto unique = canonicalized();
        Vector c = Vector::Zero(dim());
        for (const auto& v : unique.vertices()) c += v;
        return c / double(unique.vertices().size());
    }

private:
    std::vector<Vector> vertices_;
};

/// { x : normals * x <= offsets }.
class HPolytope {
public:
    HPolytope() = default;
    HPolytope(Matrix normals, Vector offsets) : normals_(std::move(normals)), offsets_(std::move(offsets)) {
        require(normals_.rows() == offsets_.size(), "HPolytope: normals/offsets row count mismatch");
        for (Eigen::Index r = 0; r < normals_.rows(); ++r)
            require(normals_.row(r).squaredNorm() > 0.0, "HPolytope: zero normal in row " + std::to_string(r));
    }

    Eigen::Index dim() const { return normals_.cols(); }
    Eigen::Index size() const { return normals_.rows(); }
    const Matrix& normals() const { return normals_; }
    const Vector& offsets() const { return offsets_; }

    /// Largest residual normals*x - offsets (<= 0 inside).
    double max_violation(const Vector& x) const {
        require(x.size() == dim(), "HPolytope: dimension mismatch");
        if (size() == 0) return -std::numeric_limits<double>::infinity();
        return (normals_ * x - offsets_).maxCoeff();
    }
    bool contains(const Vector& x, double tol = kContainmentTol) const { return max_violation(x) <= tol; }

private:
    Matrix normals_;
    Vector offsets_;
};

inline HPolytope box_to_hrep(const HyperRectangle& box) {
    const auto n = box.dim();
    Matrix normals = Matrix::Zero(2 * n, n);
    Vector offsets(2 * n);
    for (Eigen::Index d = 0; d < n; ++d) {
        normals(2 * d, d) = 1.0;
        offsets[2 * d] = box.upper()[d];
        normals(2 * d + 1, d) = -1.0;
        offsets[2 * d + 1] = -box.lower()[d];
    }
    return {std::move(normals), std::move(offsets)};
}

/// Componentwise min/max envelope of a point set.
inline HyperRectangle bounding_box(std::span<const Vector> points) {
    if (points.empty()) fail("bounding_box: no points");
    Vector lo = points.front(), hi = points.front();
    for (const auto& p : points) {
        require(p.size() == lo.size(), "bounding_box: points of mixed dimension");
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return {std::move(lo), std::move(hi)};
}

inline HyperRectangle bounding_box(const VPolytope& poly) { return bounding_box(std::span<const Vector>(poly.vertices())); }

namespace detail {

// Unit normal of the hyperplane through n points in R^n, or nullopt when the
// points are affinely dependent.
inline std::optional<Vector> hyperplane_normal(const std::vector<const Vector*>& pts, double scale) {
    const auto n = pts.front()->size();
    const double tiny = 1e-12 * scale;
    Vector normal(n);
    if (n == 1) {
        normal[0] = 1.0;
        return normal;
    }
    if (n == 2) {
        const Vector e = *pts[1] - *pts[0];
        normal << -e[1], e[0];
    } else if (n == 3) {
        const Eigen::Vector3d e1 = *pts[1] - *pts[0];
        const Eigen::Vector3d e2 = *pts[2] - *pts[0];
        normal = e1.cross(e2);
    } else {
        Matrix diffs(n - 1, n);
        for (Eigen::Index k = 1; k < n; ++k) diffs.row(k - 1) = (*pts[k] - *pts[0]).transpose();
        Eigen::FullPivLU<Matrix> lu(diffs);
        lu.setThreshold(1e-12);
        if (lu.rank() != n - 1) return std::nullopt;
        normal = lu.kernel().col(0);
    }
    const double len = normal.norm();
    if (!(len > tiny * tiny) || !(len > 0.0)) return std::nullopt;
    return normal / len;
}

}  // namespace detail

/// Facet (halfspace) representation of conv(vertices), for dimension n <= 6.
///
/// Facets are found by testing every n-subset of the distinct vertices for a
/// supporting hyperplane, which is exact but combinatorial; inputs beyond a
/// few dozen points in high dimension are rejected. A hull whose affine span
/// is lower dimensional raises NumericalError with the singular-value ratio
/// of the centered vertex matrix as diagnostic.
inline HPolytope vhull_to_hrep(const VPolytope& poly) {
    const VPolytope canon = poly.canonicalized();
    const auto& pts = canon.vertices();
    const auto n = canon.dim();
    if (n < 1 || n > kMaxHullDimension)
        fail("vhull_to_hrep: dimension " + std::to_string(n) + " outside supported range 1.." +
             std::to_string(kMaxHullDimension));

    double scale = 1.0;
    for (const auto& p : pts) scale = std::max(scale, p.cwiseAbs().maxCoeff());

    // Full-dimensionality check.
    const Vector c = canon.centroid();
    Matrix centered(n, Eigen::Index(pts.size()));
    for (std::size_t k = 0; k < pts.size(); ++k) centered.col(Eigen::Index(k)) = pts[k] - c;
    if (pts.size() < std::size_t(n) + 1) {
        throw NumericalError("vhull_to_hrep: degenerate hull, " + std::to_string(pts.size()) +
                             " distinct vertices cannot span dimension " + std::to_string(n));
    }
    Eigen::JacobiSVD<Matrix> svd(centered);
    const Vector sv = svd.singularValues();
    const double smax = sv[0], smin = sv[n - 1];
    if (!(smin > 1e-10 * std::max(smax, 1e-300))) {
        std::ostringstream os;
        os << "vhull_to_hrep: degenerate hull, singular value ratio smin/smax = "
           << (smax > 0 ? smin / smax : 0.0) << " (condition " << (smin > 0 ? smax / smin : INFINITY) << ")";
        throw NumericalError(os.str());
    }

    if (n == 1) {
        double lo = pts.front()[0], hi = lo;
        for (const auto& p : pts) { lo = std::min(lo, p[0]); hi = std::max(hi, p[0]); }
        Matrix normals(2, 1);
        normals << 1.0, -1.0;
        Vector offsets(2);
        offsets << hi, -lo;
        return {std::move(normals), std::move(offsets)};
    }

    const std::size_t count = pts.size();
    // Number of n-subsets, guarded against overflow.
    double combos = 1.0;
    for (Eigen::Index k = 0; k < n; ++k) combos = combos * double(count - std::size_t(k)) / double(k + 1);
    if (combos > 5e7)
        fail("vhull_to_hrep: " + std::to_string(count) + " vertices in dimension " + std::to_string(n) +
             " exceed the enumeration budget");

    const double side_tol = 1e-10 * scale;
    std::vector<Vector> normals;
    std::vector<double> offsets;
    std::vector<std::size_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<const Vector*> subset(static_cast<std::size_t>(n));
    for (;;) {
        for (Eigen::Index k = 0; k < n; ++k) subset[std::size_t(k)] = &pts[idx[std::size_t(k)]];
        if (auto normal = detail::hyperplane_normal(subset, scale)) {
            const double b = normal->dot(*subset[0]);
            bool any_above = false, any_below = false;
            for (const auto& p : pts) {
                const double r = normal->dot(p) - b;
                if (r > side_tol) any_above = true;
                if (r < -side_tol) any_below = true;
                if (any_above && any_below) break;
            }
            if (!(any_above && any_below)) {
                Vector a = any_above ? Vector(-*normal) : *normal;
                double off = any_above ? -b : b;
                // Tighten the offset so every vertex satisfies the halfspace exactly.
                for (const auto& p : pts) off = std::max(off, a.dot(p));
                bool duplicate = false;
                for (std::size_t f = 0; f < normals.size(); ++f) {
                    if ((normals[f] - a).cwiseAbs().maxCoeff() < 1e-9 && std::abs(offsets[f] - off) < 1e-9 * scale) {
                        duplicate = true;
                        break;
                    }
                }
                if (!duplicate) {
                    normals.push_back(std::move(a));
                    offsets.push_back(off);
                }
            }
        }
        // Next combination in lexicographic order.
        Eigen::Index k = n - 1;
        while (k >= 0 && idx[std::size_t(k)] == count - std::size_t(n - k)) --k;
        if (k < 0) break;
        ++idx[std::size_t(k)];
        for (Eigen::Index j = k + 1; j < n; ++j) idx[std::size_t(j)] = idx[std::size_t(j - 1)] + 1;
    }

    Matrix H(Eigen::Index(normals.size()), n);
    Vector h(Eigen::Index(normals.size()));
    for (std::size_t f = 0; f < normals.size(); ++f) {
        H.row(Eigen::Index(f)) = normals[f].transpose();
        h[Eigen::Index(f)] = offsets[f];
    }
    return {std::move(H), std::move(h)};
}

/// True iff every corner of the box satisfies every halfspace within tol.
/// Evaluated per halfspace at the maximizing corner, which is the same sum
/// the corner enumeration would compute for that corner.
inline bool polytope_contains_box(const HPolytope& poly, const HyperRectangle& box, double tol = kContainmentTol) {
    require(poly.dim() == box.dim(), "polytope_contains_box: dimension mismatch (" +
                                         dims_string(poly.dim(), box.dim()) + ")");
    const auto& H = poly.normals();
    const auto& lo = box.lower();
    const auto& hi = box.upper();
    for (Eigen::Index r = 0; r < H.rows(); ++r) {
        double worst = 0.0;
        for (Eigen::Index d = 0; d < H.cols(); ++d) {
            const double a = H(r, d);
            worst += a >= 0.0 ? a * hi[d] : a * lo[d];
        }
        if (worst - poly.offsets()[r] > tol) return false;
    }
    return true;
}

enum class BoxRelation { Disjoint, Intersects, Contained };

inline const char* to_string(BoxRelation r) {
    switch (r) {
        case BoxRelation::Disjoint: return "Disjoint";
        case BoxRelation::Intersects: return "Intersects";
        case BoxRelation::Contained: return "Contained";
    }
    return "?";
}

/// Relation of closed interval [alo, ahi] to [blo, bhi].
inline BoxRelation interval_relation(double alo, double ahi, double blo, double bhi) {
    if (ahi < blo || alo > bhi) return BoxRelation::Disjoint;
    if (alo >= blo && ahi <= bhi) return BoxRelation::Contained;
    return BoxRelation::Intersects;
}

/// Relation of a to b as closed sets: Contained means a is a subset of b;
/// touching boundaries intersect.
inline BoxRelation box_relation(const HyperRectangle& a, const HyperRectangle& b) {
    require(a.dim() == b.dim(), "box_relation: dimension mismatch (" + dims_string(a.dim(), b.dim()) + ")");
    bool contained = true;
    for (Eigen::Index d = 0; d < a.dim(); ++d) {
        const auto rel = interval_relation(a.lower()[d], a.upper()[d], b.lower()[d], b.upper()[d]);
        if (rel == BoxRelation::Disjoint) return BoxRelation::Disjoint;
        if (rel != BoxRelation::Contained) contained = false;
    }
    return contained ? BoxRelation::Contained : BoxRelation::Intersects;
}

/// Rectangular grid partition of a domain box. State 0 is the absorbing
/// region (everything outside the domain); states 1..L are the grid cells in
/// row-major order with the last dimension varying fastest.
class Partition {
public:
    Partition() = default;

    Partition(HyperRectangle domain, std::vector<int> counts, std::optional<HyperRectangle> goal,
              std::vector<HyperRectangle> unsafe_exclusions, HyperRectangle safe_domain)
        : domain_(std::move(domain)),
          counts_(std::move(counts)),
          goal_(std::move(goal)),
          exclusions_(std::move(unsafe_exclusions)),
          safe_domain_(std::move(safe_domain)) {
        const auto n = domain_.dim();
        require(n >= 1, "grid_partition: empty domain");
        require(Eigen::Index(counts_.size()) == n, "grid_partition: counts length " + std::to_string(counts_.size()) +
                                                       " does not match domain dimension " + std::to_string(n));
        for (Eigen::Index d = 0; d < n; ++d) {
            require(counts_[std::size_t(d)] >= 1, "grid_partition: counts must be >= 1");
            if (!(domain_.upper()[d] > domain_.lower()[d]))
                fail("grid_partition: zero-width domain in dimension " + std::to_string(d));
            require(std::isfinite(domain_.lower()[d]) && std::isfinite(domain_.upper()[d]),
                    "grid_partition: domain must be bounded");
        }
        if (goal_) require(goal_->dim() == n, "grid_partition: goal dimension mismatch");
        for (const auto& e : exclusions_) require(e.dim() == n, "grid_partition: exclusion dimension mismatch");
        require(safe_domain_.dim() == n, "grid_partition: safe domain dimension mismatch");

        strides_.assign(std::size_t(n), 1);
        std::size_t total = 1;
        for (Eigen::Index d = n - 1; d >= 0; --d) {
            strides_[std::size_t(d)] = total;
            total *= std::size_t(counts_[std::size_t(d)]);
        }
        edges_.resize(static_cast<std::size_t>(n));
        for (Eigen::Index d = 0; d < n; ++d) {
            const int c = counts_[std::size_t(d)];
            const double lo = domain_.lower()[d], hi = domain_.upper()[d];
            auto& e = edges_[std::size_t(d)];
            e.resize(std::size_t(c) + 1);
            for (int k = 0; k <= c; ++k) e[std::size_t(k)] = lo + (hi - lo) * double(k) / double(c);
            e.back() = hi;
        }
        regions_.reserve(total);
        goal_mask_.assign(total + 1, false);
        unsafe_mask_.assign(total + 1, false);
        std::vector<int> multi(std::size_t(n), 0);
        for (std::size_t r = 0; r < total; ++r) {
            std::size_t rest = r;
            Vector lo(n), hi(n);
            for (Eigen::Index d = 0; d < n; ++d) {
                multi[std::size_t(d)] = int(rest / strides_[std::size_t(d)]);
                rest %= strides_[std::size_t(d)];
                lo[d] = edges_[std::size_t(d)][std::size_t(multi[std::size_t(d)])];
                hi[d] = edges_[std::size_t(d)][std::size_t(multi[std::size_t(d)]) + 1];
            }
            regions_.emplace_back(lo, hi);
            const auto& cell = regions_.back();
            goal_mask_[r + 1] = goal_ && box_relation(cell, *goal_) == BoxRelation::Contained;
            for (const auto& ex : exclusions_) {
                if (overlaps_interior(cell, ex)) unsafe_mask_[r + 1] = true;
            }
        }
    }

    /// Number of grid regions L (the absorbing state is extra).
    std::size_t size() const { return regions_.size(); }
    std::size_t num_states() const { return regions_.size() + 1; }
    Eigen::Index dim() const { return domain_.dim(); }

    const HyperRectangle& domain() const { return domain_; }
    const HyperRectangle& safe_domain() const { return safe_domain_; }
    const std::optional<HyperRectangle>& goal_set() const { return goal_; }
    const std::vector<HyperRectangle>& exclusions() const { return exclusions_; }
    const std::vector<int>& counts() const { return counts_; }
    const std::vector<double>& edges(Eigen::Index d) const { return edges_[std::size_t(d)]; }
    std::size_t stride(Eigen::Index d) const { return strides_[std::size_t(d)]; }

    /// Region of state s (1-based).
    const HyperRectangle& region(std::size_t state) const {
        require(state >= 1 && state <= regions_.size(), "Partition::region: state out of range");
        return regions_[state - 1];
    }
    const std::vector<HyperRectangle>& regions() const { return regions_; }

    bool is_goal(std::size_t state) const { return goal_mask_.at(state); }
    bool is_unsafe(std::size_t state) const { return unsafe_mask_.at(state); }
    /// True for the absorbing state and for regions touching an exclusion.
    bool is_failure(std::size_t state) const { return state == 0 || unsafe_mask_.at(state); }
    const std::vector<bool>& goal_mask() const { return goal_mask_; }
    const std::vector<bool>& unsafe_mask() const { return unsafe_mask_; }

    /// Index range of cells whose closed extent in dimension d meets [lo, hi],
    /// clamped to the grid; empty (first > second) if none.
    std::pair<int, int> index_range(Eigen::Index d, double lo, double hi) const {
        const auto& e = edges_[std::size_t(d)];
        const int c = counts_[std::size_t(d)];
        if (hi < e.front() || lo > e.back()) return {1, 0};
        // first cell whose upper edge >= lo
        int first = int(std::lower_bound(e.begin() + 1, e.end(), lo) - (e.begin() + 1));
        // last cell whose lower edge <= hi
        int last = int(std::upper_bound(e.begin(), e.end() - 1, hi) - e.begin()) - 1;
        first = std::clamp(first, 0, c - 1);
        last = std::clamp(last, 0, c - 1);
        return {first, last};
    }

    std::size_t state_of(const std::vector<int>& multi) const {
        std::size_t r = 0;
        for (std::size_t d = 0; d < multi.size(); ++d) r += std::size_t(multi[d]) * strides_[d];
        return r + 1;
    }

    std::vector<int> multi_index(std::size_t state) const {
        require(state >= 1 && state <= regions_.size(), "Partition::multi_index: state out of range");
        std::size_t rest = state - 1;
        std::vector<int> multi(counts_.size());
        for (std::size_t d = 0; d < counts_.size(); ++d) {
            multi[d] = int(rest / strides_[d]);
            rest %= strides_[d];
        }
        return multi;
    }

    /// Region index map: the state whose region contains x, 0 outside the
    /// domain. Points on a shared face go to the cell with the lower index.
    std::size_t locate(const Vector& x) const {
        require(x.size() == dim(), "Partition::locate: dimension mismatch");
        if (!domain_.contains(x)) return 0;
        std::size_t r = 0;
        for (Eigen::Index d = 0; d < dim(); ++d) {
            const auto& e = edges_[std::size_t(d)];
            int k = int(std::lower_bound(e.begin() + 1, e.end(), x[d]) - (e.begin() + 1));
            k = std::clamp(k, 0, counts_[std::size_t(d)] - 1);
            r += std::size_t(k) * strides_[std::size_t(d)];
        }
        return r + 1;
    }

private:
    static bool overlaps_interior(const HyperRectangle& a, const HyperRectangle& b) {
        for (Eigen::Index d = 0; d < a.dim(); ++d)
            if (!(a.upper()[d] > b.lower()[d] && a.lower()[d] < b.upper()[d])) return false;
        return true;
    }

    HyperRectangle domain_;
    std::vector<int> counts_;
    std::optional<HyperRectangle> goal_;
    std::vector<HyperRectangle> exclusions_;
    HyperRectangle safe_domain_;
    std::vector<std::size_t> strides_;
    std::vector<std::vector<double>> edges_;
    std::vector<HyperRectangle> regions_;
    std::vector<bool> goal_mask_;
    std::vector<bool> unsafe_mask_;
};

/// Uniform grid over `domain` with counts[d] cells in dimension d. A region
/// is a goal region iff it lies inside `goal`; regions whose interior meets
/// an exclusion box are flagged unsafe.
inline Partition grid_partition(const HyperRectangle& domain, const std::vector<int>& counts,
                                std::optional<HyperRectangle> goal = std::nullopt,
                                std::vector<HyperRectangle> unsafe_exclusions = {},
                                std::optional<HyperRectangle> safe_domain = std::nullopt) {
    HyperRectangle safe = safe_domain ? *safe_domain : HyperRectangle::unbounded(domain.dim());
    return Partition(domain, counts, std::move(goal), std::move(unsafe_exclusions), std::move(safe));
}

}  // namespace pacabs
