// pacabs: build PAC interval-MDP abstractions, synthesize robust controllers,
// and run the benchmark experiments.

#include "pacabs/experiments.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace pacabs;

namespace {

struct Common {
    std::string config;
    std::string params;  // benchmark parameter overrides (JSON file)
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<long> samples;
    std::optional<double> confidence;
    std::optional<double> merge_radius;
    unsigned workers = 0;
    bool baseline = false;

    void add_to(CLI::App* app, bool needs_config) {
        auto* c = app->add_option("--config", config, "run configuration (JSON)");
        if (needs_config) c->required()->check(CLI::ExistingFile);
        app->add_option("--seed", seed, "noise sampling seed");
        app->add_option("--samples", samples, "noise samples per action (N)");
        app->add_option("--confidence", confidence, "overall confidence 1 - beta~");
        app->add_option("--merge-radius", merge_radius, "sample merging radius rho (0 disables merging)");
        app->add_option("--workers", workers, "worker threads (0: all cores)");
        app->add_option("--out", out, "output directory");
        app->add_flag("--baseline", baseline, "neglect parameter uncertainty (nominal model only)");
    }

    void apply(RunConfig& c) const {
        if (seed) c.seed = *seed;
        if (samples) c.samples = *samples;
        if (confidence) c.confidence = *confidence;
        if (merge_radius) c.merge_radius = *merge_radius;
        if (baseline) c.neglect_epistemic = true;
    }
};

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(path + ": " + e.what());
    }
}

RunConfig config_for(const Common& o) {
    RunConfig c = load_config(o.config);
    o.apply(c);
    return c;
}

PipelineResult run_and_write(const RunConfig& c, const Common& o) {
    std::filesystem::create_directories(o.out);
    try {
        auto r = run_pipeline(c, o.workers, &std::cerr);
        write_artifacts(r, o.out);
        return r;
    } catch (const Error& e) {
        // Leave a trace of the failed run next to whatever was written.
        write_file(std::filesystem::path(o.out) / "report.txt", [&](std::ostream& os) { os << "failed: " << e.what() << '\n'; });
        throw;
    }
}

void write_sweep(const PipelineResult& r, const Common& o, long trials, const std::string& file) {
    const auto sw = benchmark_sweep(r.config);
    const auto rows = run_fraction_table(r, sw, trials, r.config.seed, o.workers);
    write_file(std::filesystem::path(o.out) / file, [&](std::ostream& os) { write_fraction_csv(sw, rows, os); });
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < sw.columns.size(); ++i) std::cout << sw.columns[i] << '=' << row.labels[i] << ' ';
        std::cout << "safe " << row.row.states_tested - row.row.states_unsafe << '/' << row.row.states_tested << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PAC interval-MDP abstraction and robust controller synthesis for linear systems with uncertain parameters"};
    app.require_subcommand(1);

    Common o;
    long trials = 1000;
    std::vector<double> alpha;
    std::string bench;

    auto* abstract = app.add_subcommand("abstract", "build the interval MDP and write imdp.txt and report.txt");
    o.add_to(abstract, true);

    auto* synth = app.add_subcommand("synthesize", "abstraction plus robust synthesis; writes all artifacts");
    o.add_to(synth, true);

    auto* sim = app.add_subcommand("simulate", "synthesize, then Monte Carlo check every region with lambda > 0");
    o.add_to(sim, true);
    sim->add_option("--trials", trials, "simulations per region");
    sim->add_option("--alpha", alpha, "true parameter weights (default: the nominal parameter)");

    auto* bm = app.add_subcommand("benchmark", "run a named benchmark and its experiment");
    o.add_to(bm, false);
    bm->add_option("name", bench, "drone | drone-2param | temperature | anesthesia")->required();
    bm->add_option("--params", o.params, "JSON file with benchmark parameters (required for anesthesia)");
    bm->add_option("--trials", trials, "simulations per region (drone experiments)");

    auto* exp = app.add_subcommand("export", "write the resolved configuration and the interval MDP");
    o.add_to(exp, false);
    exp->add_option("--benchmark", bench, "export a named benchmark instead of --config");
    exp->add_option("--params", o.params, "JSON file with benchmark parameters");

    CLI11_PARSE(app, argc, argv);

    try {
        const std::filesystem::path out = o.out;
        if (abstract->parsed()) {
            auto r = run_pipeline(config_for(o), o.workers, &std::cerr);
            std::filesystem::create_directories(out);
            write_file(out / "imdp.txt", [&](std::ostream& os) { export_interval_model(r.imdp, os); });
            write_file(out / "report.txt", [&](std::ostream& os) { write_report(r, os); });
        } else if (synth->parsed()) {
            auto r = run_and_write(config_for(o), o);
            write_report(r, std::cout);
        } else if (sim->parsed()) {
            auto r = run_and_write(config_for(o), o);
            Vector a = alpha.empty() ? Vector(r.model->alpha_hat()) : Vector(Eigen::Map<const Vector>(alpha.data(), Eigen::Index(alpha.size())));
            ParameterSweep sw;
            sw.columns = {"sweep"};
            sw.labels = {{0.0}};
            sw.alphas = {a};
            const auto rows = run_fraction_table(r, sw, trials, r.config.seed, o.workers);
            write_file(out / "fraction_safe.csv", [&](std::ostream& os) { write_fraction_csv(sw, rows, os); });
            std::cout << "safe " << rows[0].row.states_tested - rows[0].row.states_unsafe << '/' << rows[0].row.states_tested
                      << " regions with lambda > 0\n";
        } else if (bm->parsed()) {
            RunConfig c = o.config.empty() ? benchmark_config(bench, o.params.empty() ? json::object() : read_json(o.params))
                                           : config_for(o);
            o.apply(c);
            auto r = run_and_write(c, o);
            write_report(r, std::cout);
            if (c.name == "drone" || c.name == "drone-2param") {
                write_sweep(r, o, trials, c.neglect_epistemic ? "fraction_safe_baseline.csv" : "fraction_safe.csv");
            } else {
                write_file(out / "heatmap.csv", [&](std::ostream& os) { write_heatmap_csv(r, os); });
            }
        } else if (exp->parsed()) {
            RunConfig c;
            if (!bench.empty()) c = benchmark_config(bench, o.params.empty() ? json::object() : read_json(o.params));
            else if (!o.config.empty()) c = load_config(o.config);
            else fail("export: give --config or --benchmark");
            o.apply(c);
            std::filesystem::create_directories(out);
            write_file(out / "config.json", [&](std::ostream& os) { os << to_json(c).dump(2) << '\n'; });
            auto r = run_pipeline(c, o.workers, &std::cerr);
            write_file(out / "imdp.txt", [&](std::ostream& os) { export_interval_model(r.imdp, os); });
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        // Leave a report behind so batch runs can tell what went wrong.
        std::error_code ec;
        std::filesystem::create_directories(o.out, ec);
        std::ofstream rep(std::filesystem::path(o.out) / "report.txt");
        if (rep) rep << "failed: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
