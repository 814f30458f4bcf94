#pragma once

// Named benchmarks and the experiments that go with them: safe-fraction
// tables over the true parameter for the drones, lambda heatmaps for the
// temperature and anesthesia models.

#include "pacabs/benchmarks.hpp"

namespace pacabs {

inline const std::vector<std::string>& benchmark_names() {
    static const std::vector<std::string> names{"drone", "drone-2param", "temperature", "anesthesia"};
    return names;
}

/// Builds the configuration of a named benchmark. `params` may override
/// benchmark parameters: noise_std and target_scale for the drones,
/// zone_cells / rad_cells for temperature, the pharmacokinetic constants
/// (mandatory) for anesthesia.
inline RunConfig benchmark_config(const std::string& name, const json& params = json::object()) {
    auto scale = [&](std::vector<double>& ts) {
        if (params.contains("target_scale")) ts = params["target_scale"].get<std::vector<double>>();
    };
    if (name == "drone") {
        DroneParams p;
        p.noise_std = params.value("noise_std", p.noise_std);
        scale(p.target_scale);
        return drone_config(p);
    }
    if (name == "drone-2param") {
        Drone2Params p;
        p.noise_std = params.value("noise_std", p.noise_std);
        scale(p.target_scale);
        return drone2_config(p);
    }
    if (name == "temperature") {
        TemperatureParams p;
        scale(p.target_scale);
        return temperature_config(params.value("zone_cells", 15), params.value("rad_cells", 25), p);
    }
    if (name == "anesthesia") return anesthesia_config(AnesthesiaParams::from_json(params));
    fail("unknown benchmark '" + name + "' (expected drone, drone-2param, temperature or anesthesia)");
}

struct ParameterSweep {
    std::vector<std::string> columns;  // label column names
    std::vector<std::vector<double>> labels;
    std::vector<Vector> alphas;
};

/// True-parameter grid used by the drone safe-fraction experiments.
inline ParameterSweep benchmark_sweep(const RunConfig& c) {
    ParameterSweep sw;
    if (c.name == "drone") {
        DroneParams p;
        p.m_min = c.extra.value("m_min", p.m_min);
        p.m_max = c.extra.value("m_max", p.m_max);
        sw.columns = {"mass"};
        for (double m : c.extra.at("masses").get<std::vector<double>>()) {
            sw.labels.push_back({m});
            sw.alphas.push_back(drone_alpha(m, p));
        }
    } else if (c.name == "drone-2param") {
        sw.columns = {"mass", "spring"};
        for (double m : c.extra.at("masses").get<std::vector<double>>())
            for (double z : c.extra.at("zetas").get<std::vector<double>>()) {
                sw.labels.push_back({m, z});
                sw.alphas.push_back(drone2_alpha(m, z));
            }
    } else {
        fail("benchmark_sweep: no parameter sweep defined for '" + c.name + "'");
    }
    return sw;
}

struct FractionRow {
    std::vector<double> labels;
    SafetyFractionRow row;
};

/// Monte Carlo check of every region with lambda > 0 for each swept true
/// parameter; see safety_fraction_experiment. The plant is always the full
/// uncertain model, also when the controller was synthesized on the nominal
/// model only.
inline std::vector<FractionRow> run_fraction_table(const PipelineResult& r, const ParameterSweep& sw, long trials,
                                                   std::uint64_t seed, unsigned workers = 0) {
    RunConfig plant_config = r.config;
    plant_config.neglect_epistemic = false;
    const ParametricLinearModel plant = build_model(plant_config);
    Controller ctrl(*r.model, r.structure->targets);
    ClosedLoop loop{plant, *r.partition, ctrl, r.policy, r.spec()};
    std::vector<double> tags(sw.alphas.size());
    for (std::size_t i = 0; i < tags.size(); ++i) tags[i] = double(i);
    const auto rows = safety_fraction_experiment(loop, tags, sw.alphas, trials, seed, workers);
    std::vector<FractionRow> out;
    for (std::size_t i = 0; i < rows.size(); ++i) out.push_back({sw.labels[i], rows[i]});
    return out;
}

inline void write_fraction_csv(const ParameterSweep& sw, const std::vector<FractionRow>& rows, std::ostream& os) {
    for (const auto& c : sw.columns) os << c << ',';
    os << "states_tested,states_unsafe,fraction_safe\n";
    char buf[64];
    for (const auto& r : rows) {
        for (double v : r.labels) {
            std::snprintf(buf, sizeof buf, "%.6g,", v);
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "%.17g", r.row.fraction_safe);
        os << r.row.states_tested << ',' << r.row.states_unsafe << ',' << buf << '\n';
    }
}

/// Grid indices, region center and lambda for every region; the layout
/// plots directly as a 2-D or 3-D heatmap.
inline void write_heatmap_csv(const PipelineResult& r, std::ostream& os) {
    const auto& p = *r.partition;
    const auto n = p.dim();
    for (Eigen::Index d = 0; d < n; ++d) os << 'i' << d << ',';
    for (Eigen::Index d = 0; d < n; ++d) os << 'x' << d << ',';
    os << "lambda\n";
    char buf[64];
    for (std::size_t s = 1; s < p.num_states(); ++s) {
        for (int i : p.multi_index(s)) os << i << ',';
        const Vector c = p.region(s).center();
        for (Eigen::Index d = 0; d < n; ++d) {
            std::snprintf(buf, sizeof buf, "%.10g,", c[d]);
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "%.17g\n", r.lambda(s));
        os << buf;
    }
}

}  // namespace pacabs
