#pragma once

// Abstract states/actions, successor clouds and sample counting.

#include "pacabs/model.hpp"
#include "pacabs/pac.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <functional>
#include <map>
#include <ostream>
#include <unordered_map>

namespace pacabs {

struct AbstractStructure {
    const Partition* partition = nullptr;
    ActionTargets targets;
    /// Halfspace form of each action's backward reach set; empty for actions
    /// whose reach set is degenerate (those are never enabled).
    std::vector<std::optional<HPolytope>> reach_hrep;
    std::vector<HyperRectangle> target_boxes;
    /// enabled[s]: sorted action indices enabled in state s (s = 0..L).
    std::vector<std::vector<int>> enabled;
    /// enabled_in[l]: sorted states in which action l is enabled.
    std::vector<std::vector<std::size_t>> enabled_in;
    std::vector<std::string> warnings;

    std::size_t num_states() const { return enabled.size(); }
    std::size_t num_actions() const { return targets.size(); }
    std::size_t total_enabled() const {
        std::size_t t = 0;
        for (const auto& e : enabled) t += e.size();
        return t;
    }
    bool is_goal(std::size_t s) const { return partition->is_goal(s); }
};

/// Enabled actions: action l is enabled in state i iff region i lies inside
/// the backward reach set of target l.
inline AbstractStructure build_structure(const ParametricLinearModel& model, const Partition& partition,
                                         const ActionTargets& targets, unsigned workers = 0) {
    require(model.n() == partition.dim(), "build_structure: model/partition dimension mismatch (" +
                                              dims_string(model.n(), partition.dim()) + ")");
    targets.validate(model.n());
    AbstractStructure st;
    st.partition = &partition;
    st.targets = targets;
    const std::size_t M = targets.size();
    st.reach_hrep.resize(M);
    st.target_boxes.resize(M);
    st.enabled_in.resize(M);
    std::vector<std::string> warn(M);

    parallel_for(M, [&](std::size_t l) {
        st.target_boxes[l] = bounding_box(targets.targets[l]);
        const VPolytope reach = model.backward_reach_set(targets.targets[l]);
        try {
            st.reach_hrep[l] = vhull_to_hrep(reach);
        } catch (const NumericalError& e) {
            warn[l] = "action " + std::to_string(l) + ": degenerate backward reach set, never enabled (" + e.what() + ")";
            return;
        }
        const HyperRectangle hull_box = bounding_box(reach);
        const auto n = partition.dim();
        std::vector<std::pair<int, int>> range(static_cast<std::size_t>(n));
        for (Eigen::Index d = 0; d < n; ++d) {
            range[std::size_t(d)] = partition.index_range(d, hull_box.lower()[d], hull_box.upper()[d]);
            if (range[std::size_t(d)].first > range[std::size_t(d)].second) return;
        }
        std::vector<int> multi(static_cast<std::size_t>(n));
        for (Eigen::Index d = 0; d < n; ++d) multi[std::size_t(d)] = range[std::size_t(d)].first;
        for (;;) {
            const std::size_t s = partition.state_of(multi);
            if (polytope_contains_box(*st.reach_hrep[l], partition.region(s))) st.enabled_in[l].push_back(s);
            Eigen::Index d = n - 1;
            while (d >= 0 && multi[std::size_t(d)] == range[std::size_t(d)].second) {
                multi[std::size_t(d)] = range[std::size_t(d)].first;
                --d;
            }
            if (d < 0) break;
            ++multi[std::size_t(d)];
        }
    }, workers);

    st.enabled.assign(partition.num_states(), {});
    for (std::size_t l = 0; l < M; ++l) {
        if (!warn[l].empty()) st.warnings.push_back(warn[l]);
        for (auto s : st.enabled_in[l]) st.enabled[s].push_back(int(l));
    }
    return st;
}

/// Weighted list of successor boxes for one (region, action) pair.
struct SuccessorCloud {
    std::vector<HyperRectangle> boxes;
    std::vector<long> multiplicities;
    long total_weight = 0;
    std::size_t origin_state = 0;
    std::size_t action = 0;

    std::size_t size() const { return boxes.size(); }
};

/// Greedy merging: take the lowest-index unmerged box, absorb every unmerged
/// box whose center is within rho of its center, emit the bounding box of
/// the group with the summed multiplicity. rho = 0 returns the input.
inline void merge_boxes(std::vector<HyperRectangle>& boxes, std::vector<long>& mult, double rho) {
    require(boxes.size() == mult.size(), "merge_boxes: length mismatch");
    require(rho >= 0.0, "merge_boxes: negative radius");
    if (rho == 0.0 || boxes.empty()) return;
    const auto n = boxes.front().dim();
    std::vector<Vector> centers;
    centers.reserve(boxes.size());
    for (const auto& b : boxes) centers.push_back(b.center());

    // Spatial hash with cell size rho: partners of a box lie in the 3^n
    // neighbouring cells.
    auto key_of = [&](const Vector& c) {
        std::vector<long long> k(static_cast<std::size_t>(n));
        for (Eigen::Index d = 0; d < n; ++d) k[std::size_t(d)] = (long long)std::floor(c[d] / rho);
        return k;
    };
    struct KeyHash {
        std::size_t operator()(const std::vector<long long>& k) const {
            std::size_t h = 0xcbf29ce484222325ULL;
            for (auto v : k) h = (h ^ std::size_t(v)) * 0x100000001b3ULL;
            return h;
        }
    };
    std::unordered_map<std::vector<long long>, std::vector<std::size_t>, KeyHash> grid;
    for (std::size_t k = 0; k < boxes.size(); ++k) grid[key_of(centers[k])].push_back(k);

    std::vector<char> merged(boxes.size(), 0);
    std::vector<HyperRectangle> out_boxes;
    std::vector<long> out_mult;
    const double rho2 = rho * rho;
    std::vector<long long> probe(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < boxes.size(); ++k) {
        if (merged[k]) continue;
        merged[k] = 1;
        Vector lo = boxes[k].lower(), hi = boxes[k].upper();
        long weight = mult[k];
        const auto base = key_of(centers[k]);
        const std::size_t neighbours = std::size_t(std::pow(3.0, double(n)));
        for (std::size_t code = 0; code < neighbours; ++code) {
            std::size_t c = code;
            for (Eigen::Index d = 0; d < n; ++d) {
                probe[std::size_t(d)] = base[std::size_t(d)] + (long long)(c % 3) - 1;
                c /= 3;
            }
            auto it = grid.find(probe);
            if (it == grid.end()) continue;
            for (auto j : it->second) {
                if (merged[j]) continue;
                if ((centers[j] - centers[k]).squaredNorm() <= rho2) {
                    merged[j] = 1;
                    lo = lo.cwiseMin(boxes[j].lower());
                    hi = hi.cwiseMax(boxes[j].upper());
                    weight += mult[j];
                }
            }
        }
        out_boxes.emplace_back(std::move(lo), std::move(hi));
        out_mult.push_back(weight);
    }
    boxes = std::move(out_boxes);
    mult = std::move(out_mult);
}

/// Nominal part of every successor box of (i, l): the target's bounding box
/// plus the bounding box of the epistemic-error hull of region i.
inline HyperRectangle successor_base_box(const AbstractStructure& st, const ParametricLinearModel& model,
                                         std::size_t state, std::size_t action) {
    return st.target_boxes.at(action) + model.epistemic_error_box(st.partition->region(state));
}

inline SuccessorCloud successor_cloud(const AbstractStructure& st, const ParametricLinearModel& model, std::size_t state,
                                      std::size_t action, const std::vector<Vector>& samples, double rho) {
    require(!samples.empty(), "successor_cloud: no samples");
    require(state >= 1 && state < st.num_states(), "successor_cloud: state out of range");
    const auto& en = st.enabled[state];
    require(std::binary_search(en.begin(), en.end(), int(action)), "successor_cloud: action not enabled in state");
    const HyperRectangle base = successor_base_box(st, model, state, action);
    SuccessorCloud c;
    c.origin_state = state;
    c.action = action;
    c.total_weight = long(samples.size());
    c.boxes.reserve(samples.size());
    for (const auto& eta : samples) c.boxes.push_back(base.translated(eta));
    c.multiplicities.assign(samples.size(), 1);
    merge_boxes(c.boxes, c.multiplicities, rho);
    return c;
}

/// Counts of one cloud against one region: R sums boxes inside the region,
/// Rtilde sums boxes that touch it.
inline SampleCounts count_samples(const SuccessorCloud& cloud, const HyperRectangle& region) {
    SampleCounts c;
    c.N = cloud.total_weight;
    for (std::size_t k = 0; k < cloud.size(); ++k) {
        const auto rel = box_relation(cloud.boxes[k], region);
        if (rel == BoxRelation::Disjoint) continue;
        c.Rtilde += cloud.multiplicities[k];
        if (rel == BoxRelation::Contained) c.R += cloud.multiplicities[k];
    }
    return c;
}

/// Counts for the absorbing state: R sums boxes entirely outside the
/// domain, Rtilde sums boxes not entirely inside it.
inline SampleCounts absorbing_counts(const SuccessorCloud& cloud, const Partition& partition) {
    SampleCounts c;
    c.N = cloud.total_weight;
    for (std::size_t k = 0; k < cloud.size(); ++k) {
        const auto rel = box_relation(cloud.boxes[k], partition.domain());
        if (rel == BoxRelation::Disjoint) c.R += cloud.multiplicities[k];
        if (rel != BoxRelation::Contained) c.Rtilde += cloud.multiplicities[k];
    }
    return c;
}

/// Noise samples merged once per action. Because every box of a cloud is the
/// same base box translated by a sample, merging boxes by center distance is
/// the same as merging the samples; the merged box is base + offset box.
struct NoiseClusters {
    std::vector<HyperRectangle> offsets;
    std::vector<long> multiplicities;
    long total_weight = 0;
};

inline NoiseClusters cluster_noise(const std::vector<Vector>& samples, double rho) {
    require(!samples.empty(), "cluster_noise: no samples");
    NoiseClusters nc;
    nc.total_weight = long(samples.size());
    nc.offsets.reserve(samples.size());
    for (const auto& s : samples) nc.offsets.push_back(HyperRectangle::point(s));
    nc.multiplicities.assign(samples.size(), 1);
    merge_boxes(nc.offsets, nc.multiplicities, rho);
    return nc;
}

inline SuccessorCloud cloud_from_clusters(const HyperRectangle& base, const NoiseClusters& nc, std::size_t state,
                                          std::size_t action) {
    SuccessorCloud c;
    c.origin_state = state;
    c.action = action;
    c.total_weight = nc.total_weight;
    c.multiplicities = nc.multiplicities;
    c.boxes.reserve(nc.offsets.size());
    for (const auto& o : nc.offsets) c.boxes.emplace_back(base.lower() + o.lower(), base.upper() + o.upper());
    return c;
}

/// Per-successor counts of one cloud; state 0 is the absorbing state.
struct CountRow {
    std::size_t successor = 0;
    long R = 0;
    long Rtilde = 0;
};

/// Counts of a cloud against every region at once, visiting only the grid
/// cells each box touches. Agrees exactly with count_samples and
/// absorbing_counts (same closed comparisons on the same edges).
inline std::vector<CountRow> count_all(const HyperRectangle& base, const NoiseClusters& nc, const Partition& partition) {
    const auto n = partition.dim();
    std::unordered_map<std::size_t, std::pair<long, long>> acc;
    long abs_R = 0, abs_Rt = 0;
    std::vector<std::pair<int, int>> touch(static_cast<std::size_t>(n));
    std::vector<std::array<int, 2>> inside(static_cast<std::size_t>(n));
    std::vector<int> inside_count(static_cast<std::size_t>(n));
    std::vector<int> multi(static_cast<std::size_t>(n));
    const auto& dom = partition.domain();
    Vector lo(n), hi(n);
    for (std::size_t k = 0; k < nc.offsets.size(); ++k) {
        const long w = nc.multiplicities[k];
        lo = base.lower() + nc.offsets[k].lower();
        hi = base.upper() + nc.offsets[k].upper();
        bool disjoint = false, contained_in_domain = true;
        for (Eigen::Index d = 0; d < n; ++d) {
            const auto rel = interval_relation(lo[d], hi[d], dom.lower()[d], dom.upper()[d]);
            if (rel == BoxRelation::Disjoint) disjoint = true;
            if (rel != BoxRelation::Contained) contained_in_domain = false;
        }
        if (disjoint) {
            abs_R += w;
            abs_Rt += w;
            continue;
        }
        if (!contained_in_domain) abs_Rt += w;

        bool any_inside = true;
        for (Eigen::Index d = 0; d < n; ++d) {
            const auto du = std::size_t(d);
            touch[du] = partition.index_range(d, lo[d], hi[d]);
            const auto& e = partition.edges(d);
            inside_count[du] = 0;
            for (int c = touch[du].first; c <= touch[du].second && inside_count[du] < 2; ++c)
                if (lo[d] >= e[std::size_t(c)] && hi[d] <= e[std::size_t(c) + 1]) inside[du][std::size_t(inside_count[du]++)] = c;
            if (inside_count[du] == 0) any_inside = false;
        }
        // Touched cells.
        for (Eigen::Index d = 0; d < n; ++d) multi[std::size_t(d)] = touch[std::size_t(d)].first;
        for (;;) {
            acc[partition.state_of(multi)].second += w;
            Eigen::Index d = n - 1;
            while (d >= 0 && multi[std::size_t(d)] == touch[std::size_t(d)].second) {
                multi[std::size_t(d)] = touch[std::size_t(d)].first;
                --d;
            }
            if (d < 0) break;
            ++multi[std::size_t(d)];
        }
        if (!any_inside) continue;
        // Cells containing the box (more than one only for flat boxes on an edge).
        std::vector<int> pick(std::size_t(n), 0);
        for (;;) {
            for (Eigen::Index d = 0; d < n; ++d) multi[std::size_t(d)] = inside[std::size_t(d)][std::size_t(pick[std::size_t(d)])];
            acc[partition.state_of(multi)].first += w;
            Eigen::Index d = n - 1;
            while (d >= 0 && pick[std::size_t(d)] == inside_count[std::size_t(d)] - 1) {
                pick[std::size_t(d)] = 0;
                --d;
            }
            if (d < 0) break;
            ++pick[std::size_t(d)];
        }
    }
    std::vector<CountRow> rows;
    rows.reserve(acc.size() + 1);
    if (abs_Rt > 0) rows.push_back({0, abs_R, abs_Rt});
    for (const auto& [s, c] : acc) rows.push_back({s, c.first, c.second});
    std::sort(rows.begin(), rows.end(), [](const CountRow& a, const CountRow& b) { return a.successor < b.successor; });
    return rows;
}

inline void dump_cloud(std::ostream& os, const SuccessorCloud& c) {
    os << "# cloud state=" << c.origin_state << " action=" << c.action << " N=" << c.total_weight
       << " boxes=" << c.size() << '\n';
    char buf[64];
    for (std::size_t k = 0; k < c.size(); ++k) {
        for (Eigen::Index d = 0; d < c.boxes[k].dim(); ++d) {
            std::snprintf(buf, sizeof buf, "%.17g %.17g ", c.boxes[k].lower()[d], c.boxes[k].upper()[d]);
            os << buf;
        }
        os << c.multiplicities[k] << '\n';
    }
}

}  // namespace pacabs
