#pragma once

// Configuration-driven pipeline: partition and targets, abstraction, PAC
// intervals, interval MDP, robust synthesis, artifacts.

#include "pacabs/runtime.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <unordered_set>

namespace pacabs {

using json = nlohmann::ordered_json;

struct BoxSpec {
    std::vector<double> lower;
    std::vector<double> upper;
    HyperRectangle box() const {
        return {Eigen::Map<const Vector>(lower.data(), Eigen::Index(lower.size())),
                Eigen::Map<const Vector>(upper.data(), Eigen::Index(upper.size()))};
    }
    bool operator==(const BoxSpec&) const = default;
};

using Rows = std::vector<std::vector<double>>;

struct NoiseSpec {
    std::string type = "gaussian";  // gaussian | replay
    std::vector<double> mean;
    Rows covariance;
    std::string file;  // replay: whitespace-separated samples, one per line
    bool operator==(const NoiseSpec&) const = default;
};

struct RunConfig {
    std::string name = "custom";
    // model
    std::vector<Rows> A;
    std::vector<Rows> B;
    std::vector<double> alpha_hat;  // empty: barycenter
    Rows control_vertices;
    std::optional<BoxSpec> disturbance;
    std::vector<double> offset;  // empty: zero
    NoiseSpec noise;
    // partition
    BoxSpec domain;
    std::vector<int> counts;
    std::optional<BoxSpec> goal;
    std::vector<BoxSpec> unsafe;
    // targets: cells scaled by target_scale (empty: the cells), or explicit boxes
    std::vector<double> target_scale;
    std::vector<BoxSpec> target_boxes;
    std::string spec = "reach-avoid";
    int horizon = 0;
    long samples = 20000;
    double confidence = 0.99;
    double merge_radius = 0.0;
    std::uint64_t seed = 1;
    bool neglect_epistemic = false;
    /// Free-form parameters carried along for benchmark post-processing.
    json extra = json::object();

    bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline Matrix to_matrix(const Rows& rows, const std::string& what) {
    require(!rows.empty(), "config: " + what + " is empty");
    Matrix M(Eigen::Index(rows.size()), Eigen::Index(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i].size() == rows.front().size(), "config: " + what + " has ragged rows");
        for (std::size_t j = 0; j < rows[i].size(); ++j) M(Eigen::Index(i), Eigen::Index(j)) = rows[i][j];
    }
    return M;
}

inline Rows to_rows(const Matrix& M) {
    Rows r(std::size_t(M.rows()), std::vector<double>(std::size_t(M.cols())));
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j) r[std::size_t(i)][std::size_t(j)] = M(i, j);
    return r;
}

inline Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), Eigen::Index(v.size())); }
inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline json box_json(const BoxSpec& b) { return json{{"lower", b.lower}, {"upper", b.upper}}; }
inline BoxSpec box_from(const json& j) {
    return {j.at("lower").get<std::vector<double>>(), j.at("upper").get<std::vector<double>>()};
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
    json m;
    m["A"] = c.A;
    m["B"] = c.B;
    if (!c.alpha_hat.empty()) m["alpha_hat"] = c.alpha_hat;
    m["control_vertices"] = c.control_vertices;
    if (c.disturbance) m["disturbance"] = detail::box_json(*c.disturbance);
    if (!c.offset.empty()) m["offset"] = c.offset;
    json n{{"type", c.noise.type}};
    if (c.noise.type == "gaussian") {
        n["mean"] = c.noise.mean;
        n["covariance"] = c.noise.covariance;
    } else {
        n["file"] = c.noise.file;
    }
    m["noise"] = n;

    json p{{"domain", detail::box_json(c.domain)}, {"counts", c.counts}};
    if (c.goal) p["goal"] = detail::box_json(*c.goal);
    json un = json::array();
    for (const auto& b : c.unsafe) un.push_back(detail::box_json(b));
    p["unsafe"] = un;

    json t = json::object();
    if (!c.target_scale.empty()) t["scale"] = c.target_scale;
    if (!c.target_boxes.empty()) {
        json tb = json::array();
        for (const auto& b : c.target_boxes) tb.push_back(detail::box_json(b));
        t["boxes"] = tb;
    }
    json out;
    out["name"] = c.name;
    out["model"] = m;
    out["partition"] = p;
    out["targets"] = t;
    out["spec"] = c.spec;
    out["horizon"] = c.horizon;
    out["samples"] = c.samples;
    out["confidence"] = c.confidence;
    out["merge_radius"] = c.merge_radius;
    out["seed"] = c.seed;
    out["neglect_epistemic"] = c.neglect_epistemic;
    out["extra"] = c.extra;
    return out;
}

inline RunConfig config_from_json(const json& j) {
    RunConfig c;
    try {
        c.name = j.value("name", std::string("custom"));
        const auto& m = j.at("model");
        c.A = m.at("A").get<std::vector<Rows>>();
        c.B = m.at("B").get<std::vector<Rows>>();
        if (m.contains("alpha_hat")) c.alpha_hat = m["alpha_hat"].get<std::vector<double>>();
        c.control_vertices = m.at("control_vertices").get<Rows>();
        if (m.contains("disturbance")) c.disturbance = detail::box_from(m["disturbance"]);
        if (m.contains("offset")) c.offset = m["offset"].get<std::vector<double>>();
        const auto& n = m.at("noise");
        c.noise.type = n.value("type", std::string("gaussian"));
        if (c.noise.type == "gaussian") {
            c.noise.mean = n.at("mean").get<std::vector<double>>();
            c.noise.covariance = n.at("covariance").get<Rows>();
        } else if (c.noise.type == "replay") {
            c.noise.file = n.at("file").get<std::string>();
        } else {
            fail("config: unknown noise type '" + c.noise.type + "'");
        }
        const auto& p = j.at("partition");
        c.domain = detail::box_from(p.at("domain"));
        c.counts = p.at("counts").get<std::vector<int>>();
        if (p.contains("goal")) c.goal = detail::box_from(p["goal"]);
        if (p.contains("unsafe"))
            for (const auto& b : p["unsafe"]) c.unsafe.push_back(detail::box_from(b));
        if (j.contains("targets")) {
            const auto& t = j["targets"];
            if (t.contains("scale")) c.target_scale = t["scale"].get<std::vector<double>>();
            if (t.contains("boxes"))
                for (const auto& b : t["boxes"]) c.target_boxes.push_back(detail::box_from(b));
        }
        c.spec = j.value("spec", std::string("reach-avoid"));
        c.horizon = j.at("horizon").get<int>();
        c.samples = j.value("samples", 20000L);
        c.confidence = j.value("confidence", 0.99);
        c.merge_radius = j.value("merge_radius", 0.0);
        c.seed = j.value("seed", std::uint64_t(1));
        c.neglect_epistemic = j.value("neglect_epistemic", false);
        if (j.contains("extra")) c.extra = j["extra"];
    } catch (const json::exception& e) {
        fail(std::string("config: ") + e.what());
    }
    parse_spec_kind(c.spec);
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("config: cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        fail("config: " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

inline std::vector<Vector> read_replay_file(const std::string& file, Eigen::Index n) {
    std::ifstream in(file);
    if (!in) fail("config: cannot open noise replay file " + file);
    std::vector<Vector> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        Vector v(n);
        for (Eigen::Index d = 0; d < n; ++d)
            if (!(ls >> v[d])) fail("config: malformed replay line '" + line + "'");
        out.push_back(v);
    }
    return out;
}

inline ParametricLinearModel build_model(const RunConfig& c) {
    std::vector<Matrix> A, B;
    for (std::size_t i = 0; i < c.A.size(); ++i) A.push_back(detail::to_matrix(c.A[i], "A[" + std::to_string(i) + "]"));
    for (std::size_t i = 0; i < c.B.size(); ++i) B.push_back(detail::to_matrix(c.B[i], "B[" + std::to_string(i) + "]"));
    require(!A.empty(), "config: no A matrices");
    std::vector<Vector> U;
    for (const auto& v : c.control_vertices) U.push_back(detail::to_vector(v));
    require(!U.empty(), "config: no control vertices");
    const auto n = A.front().rows();
    NoiseSource noise = c.noise.type == "gaussian"
                            ? NoiseSource::gaussian(detail::to_vector(c.noise.mean), detail::to_matrix(c.noise.covariance, "noise covariance"), c.seed)
                            : NoiseSource::replay(read_replay_file(c.noise.file, n));
    std::optional<Vector> alpha;
    if (!c.alpha_hat.empty()) alpha = detail::to_vector(c.alpha_hat);
    std::optional<HyperRectangle> Q;
    if (c.disturbance) Q = c.disturbance->box();
    std::optional<Vector> offset;
    if (!c.offset.empty()) offset = detail::to_vector(c.offset);
    ParametricLinearModel model(std::move(A), std::move(B), VPolytope(std::move(U)), std::move(noise), c.horizon, alpha, Q, offset);
    return c.neglect_epistemic ? model.without_parameter_uncertainty() : model;
}

inline Partition build_partition(const RunConfig& c) {
    std::optional<HyperRectangle> goal;
    if (c.goal) goal = c.goal->box();
    std::vector<HyperRectangle> unsafe;
    for (const auto& b : c.unsafe) unsafe.push_back(b.box());
    const auto dom = c.domain.box();
    if (goal) {
        for (Eigen::Index d = 0; d < dom.dim(); ++d)
            require(goal->lower()[d] >= dom.lower()[d] && goal->upper()[d] <= dom.upper()[d], "config: goal not inside domain");
    }
    return grid_partition(dom, c.counts, goal, unsafe);
}

inline ActionTargets build_targets(const RunConfig& c, const Partition& p) {
    if (!c.target_boxes.empty()) {
        std::vector<HyperRectangle> boxes;
        for (const auto& b : c.target_boxes) boxes.push_back(b.box());
        return ActionTargets::from_boxes(boxes);
    }
    if (!c.target_scale.empty()) return ActionTargets::from_partition(p, detail::to_vector(c.target_scale));
    return ActionTargets::from_partition(p);
}

struct PipelineStats {
    std::size_t regions = 0;
    std::size_t states = 0;
    std::size_t actions = 0;
    std::size_t enabled_pairs = 0;
    std::size_t choices = 0;
    std::size_t transitions = 0;
    std::size_t distinct_intervals = 0;
    std::size_t widened_intervals = 0;
    double mean_merged_boxes = 0.0;
    std::vector<std::pair<std::string, double>> timings;  // stage, seconds
};

struct PipelineResult {
    RunConfig config;
    std::shared_ptr<const ParametricLinearModel> model;
    std::shared_ptr<const Partition> partition;
    std::shared_ptr<const AbstractStructure> structure;
    IntervalMDP imdp;
    PolicyTable policy;
    ConfidenceLedger ledger;
    PipelineStats stats;

    double lambda(std::size_t s) const { return policy.lambda(s); }
    SpecKind spec() const { return imdp.spec(); }
};

/// Raw counts for every non-terminal enabled (state, action) pair.
struct CountTable {
    std::vector<std::size_t> pair_state;
    std::vector<int> pair_action;
    std::vector<std::vector<CountRow>> rows;
    std::vector<std::uint64_t> cloud_key;  // equal keys: identical cloud geometry and samples
    std::size_t merged_boxes_total = 0;
    std::size_t clouds = 0;
};

namespace detail {

inline std::uint64_t hash_box(std::uint64_t h, const HyperRectangle& b) {
    auto mix = [&](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        h = split_seed(h, bits);
    };
    for (Eigen::Index d = 0; d < b.dim(); ++d) {
        mix(b.lower()[d]);
        mix(b.upper()[d]);
    }
    return h;
}

struct Stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double lap() {
        const auto t = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(t - t0).count();
        t0 = t;
        return s;
    }
};

}  // namespace detail

/// States that receive no choices: absorbing/unsafe states and, for
/// reach-avoid, goal states.
inline bool terminal_region(const Partition& p, std::size_t s, SpecKind spec) {
    return p.is_failure(s) || (spec == SpecKind::ReachAvoid && p.is_goal(s));
}

/// Successor counts of every enabled pair, one noise batch per action
/// (stream = action index) merged once and shared by all origin regions.
inline CountTable compute_counts(const ParametricLinearModel& model, const AbstractStructure& st, long N, double rho,
                                 SpecKind spec, unsigned workers = 0) {
    require(N >= 1, "compute_counts: samples must be >= 1");
    const auto& part = *st.partition;
    CountTable t;
    std::vector<std::size_t> pair_of_first(st.num_states() + 1, 0);
    for (std::size_t s = 0; s < st.num_states(); ++s) {
        pair_of_first[s] = t.pair_state.size();
        if (s == 0 || terminal_region(part, s, spec)) continue;
        for (int a : st.enabled[s]) {
            t.pair_state.push_back(s);
            t.pair_action.push_back(a);
        }
    }
    pair_of_first[st.num_states()] = t.pair_state.size();
    t.rows.resize(t.pair_state.size());
    t.cloud_key.resize(t.pair_state.size());
    std::vector<std::size_t> merged(st.num_actions(), 0);
    std::vector<std::size_t> clouds(st.num_actions(), 0);

    parallel_for(st.num_actions(), [&](std::size_t l) {
        std::vector<std::size_t> origins;
        for (auto s : st.enabled_in[l])
            if (!terminal_region(part, s, spec)) origins.push_back(s);
        if (origins.empty()) return;
        NoiseSource noise = model.noise().fork(l);
        const auto nc = cluster_noise(noise.draw(std::size_t(N)), rho);
        for (auto s : origins) {
            const auto& en = st.enabled[s];
            const auto pos = std::size_t(std::lower_bound(en.begin(), en.end(), int(l)) - en.begin());
            const std::size_t pair = pair_of_first[s] + pos;
            const HyperRectangle base = successor_base_box(st, model, s, l);
            t.rows[pair] = count_all(base, nc, part);
            t.cloud_key[pair] = detail::hash_box(split_seed(0x5eed, l), base);
        }
        merged[l] = nc.offsets.size() * origins.size();
        clouds[l] = origins.size();
    }, workers, 1);
    for (std::size_t l = 0; l < st.num_actions(); ++l) {
        t.merged_boxes_total += merged[l];
        t.clouds += clouds[l];
    }
    return t;
}

/// Number of distinct intervals: rows of clouds with identical geometry are
/// counted once.
inline std::size_t distinct_interval_count(const CountTable& t) {
    std::unordered_set<std::uint64_t> seen;
    std::size_t count = 0;
    for (std::size_t p = 0; p < t.rows.size(); ++p)
        if (seen.insert(t.cloud_key[p]).second) count += t.rows[p].size();
    return count;
}

inline IntervalMDP assemble_imdp(const Partition& part, const CountTable& t, long N, double beta, int horizon, SpecKind spec,
                                 std::size_t* widened = nullptr) {
    IntervalMDP imdp(part.num_states(), horizon, spec);
    for (std::size_t s = 1; s < part.num_states(); ++s) {
        if (part.is_unsafe(s)) imdp.set_absorbing(s);
        if (part.is_goal(s)) imdp.set_goal(s);
    }
    ScenarioBoundCache cache(N, beta);
    std::size_t wid = 0;
    for (std::size_t p = 0; p < t.rows.size(); ++p) {
        std::vector<Edge> edges;
        edges.reserve(t.rows[p].size());
        for (const auto& r : t.rows[p]) {
            const auto iv = cache.interval({N, r.R, r.Rtilde});
            if (iv.widened) ++wid;
            if (iv.upper > 0.0) edges.push_back({r.successor, iv.lower, iv.upper});
        }
        imdp.add_choice(t.pair_state[p], t.pair_action[p], std::move(edges));
    }
    if (widened) *widened = wid;
    return imdp;
}

inline PipelineResult run_pipeline(const RunConfig& config, unsigned workers = 0, std::ostream* log = nullptr) {
    PipelineResult res;
    res.config = config;
    detail::Stopwatch sw;
    auto stage = [&](const char* name, auto&& body) {
        try {
            body();
        } catch (const Error& e) {
            throw Error(std::string("stage ") + name + ": " + e.what());
        }
        const double t = sw.lap();
        res.stats.timings.emplace_back(name, t);
        if (log) *log << "[" << name << "] " << std::fixed << std::setprecision(2) << t << " s\n" << std::defaultfloat;
    };
    const SpecKind spec = parse_spec_kind(config.spec);
    std::shared_ptr<ParametricLinearModel> model;
    std::shared_ptr<Partition> part;
    std::shared_ptr<AbstractStructure> st;
    ActionTargets targets;
    stage("model", [&] {
        model = std::make_shared<ParametricLinearModel>(build_model(config));
        part = std::make_shared<Partition>(build_partition(config));
        require(part->dim() == model->n(), "partition dimension does not match the model");
        targets = build_targets(config, *part);
    });
    stage("structure", [&] {
        st = std::make_shared<AbstractStructure>(build_structure(*model, *part, targets, workers));
        if (log)
            for (const auto& w : st->warnings) *log << "warning: " << w << '\n';
    });
    CountTable counts;
    stage("counts", [&] { counts = compute_counts(*model, *st, config.samples, config.merge_radius, spec, workers); });
    stage("intervals", [&] {
        res.stats.distinct_intervals = distinct_interval_count(counts);
        res.ledger = allocate_confidence(res.stats.distinct_intervals, config.confidence);
        res.imdp = assemble_imdp(*part, counts, config.samples, res.ledger.per_interval_beta, config.horizon, spec,
                                 &res.stats.widened_intervals);
        if (log)
            *log << "confidence: " << res.stats.distinct_intervals << " intervals, beta = " << res.ledger.per_interval_beta
                 << ", overall >= " << res.ledger.overall_confidence() << '\n';
    });
    stage("synthesis", [&] { res.policy = robust_value_iteration(res.imdp, workers); });
    res.model = model;
    res.partition = part;
    res.structure = st;
    res.stats.regions = part->size();
    res.stats.states = part->num_states();
    res.stats.actions = st->num_actions();
    res.stats.enabled_pairs = st->total_enabled();
    res.stats.choices = res.imdp.num_choices();
    res.stats.transitions = res.imdp.num_transitions();
    res.stats.mean_merged_boxes = counts.clouds ? double(counts.merged_boxes_total) / double(counts.clouds) : 0.0;
    return res;
}

/// bounds.csv: region index, center coordinates, lambda.
inline void write_bounds_csv(const PipelineResult& r, std::ostream& os) {
    const auto& p = *r.partition;
    os << "region";
    for (Eigen::Index d = 0; d < p.dim(); ++d) os << ",x" << d;
    os << ",lambda\n";
    char buf[64];
    for (std::size_t s = 1; s < p.num_states(); ++s) {
        os << s;
        const Vector c = p.region(s).center();
        for (Eigen::Index d = 0; d < p.dim(); ++d) {
            std::snprintf(buf, sizeof buf, ",%.17g", c[d]);
            os << buf;
        }
        std::snprintf(buf, sizeof buf, ",%.17g\n", r.lambda(s));
        os << buf;
    }
}

inline void write_report(const PipelineResult& r, std::ostream& os) {
    const auto& s = r.stats;
    const auto& c = r.config;
    os << "benchmark: " << c.name << '\n'
       << "specification: " << c.spec << ", horizon " << c.horizon << '\n'
       << "regions: " << s.regions << " (+1 absorbing), actions: " << s.actions << '\n'
       << "enabled (state, action) pairs: " << s.enabled_pairs << ", iMDP choices: " << s.choices
       << ", transitions: " << s.transitions << '\n'
       << "samples per action: " << c.samples << ", merge radius: " << c.merge_radius
       << ", mean merged boxes per cloud: " << s.mean_merged_boxes << '\n'
       << "parameter uncertainty: " << (c.neglect_epistemic ? "neglected (nominal model only)" : "accounted for") << '\n';
    os << std::setprecision(12);
    os << "distinct intervals: " << s.distinct_intervals << ", per-interval beta: " << r.ledger.per_interval_beta << '\n';
    if (s.widened_intervals) os << "intervals widened after lower > upper: " << s.widened_intervals << '\n';
    os << "statement: with probability at least " << r.ledger.overall_confidence() << " over the sampled noise, "
       << "every stored transition interval is correct and the closed-loop controller satisfies the "
       << "specification from each initial region s with probability at least lambda(s) (bounds.csv).\n";
    std::size_t positive = 0;
    double best = 0.0;
    for (std::size_t st = 1; st < r.partition->num_states(); ++st) {
        positive += r.lambda(st) > 0.0;
        best = std::max(best, r.lambda(st));
    }
    os << "regions with lambda > 0: " << positive << ", max lambda: " << best << '\n';
    os << std::setprecision(3) << std::fixed;
    for (const auto& [name, t] : s.timings) os << "time " << name << ": " << t << " s\n";
    os << std::defaultfloat;
}

inline void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    body(out);
    if (!out) throw Error("write failed: " + path.string());
}

inline void write_artifacts(const PipelineResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir / "imdp.txt", [&](std::ostream& os) { export_interval_model(r.imdp, os); });
    write_file(dir / "policy.csv", [&](std::ostream& os) { write_policy_csv(r.policy, os); });
    write_file(dir / "bounds.csv", [&](std::ostream& os) { write_bounds_csv(r, os); });
    write_file(dir / "report.txt", [&](std::ostream& os) { write_report(r, os); });
}

}  // namespace pacabs
