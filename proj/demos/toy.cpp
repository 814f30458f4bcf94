// A one-dimensional system x+ = a x + u + w with a in [0.9, 1]: steer into
// [-0.5, 0.5] within 6 steps, then check the bounds by simulation at both
// extreme parameter values.

#include "pacabs/experiments.hpp"

#include <cstdio>

using namespace pacabs;

int main(int argc, char** argv) {
    const std::string path = argc > 1 ? argv[1] : PACABS_DEMO_DIR "/toy.json";
    const RunConfig config = load_config(path);
    const PipelineResult r = run_pipeline(config, 0);
    write_report(r, std::cout);

    ParameterSweep sw;
    sw.columns = {"a"};
    sw.labels = {{0.9}, {1.0}};
    sw.alphas = {Vector::Unit(2, 0), Vector::Unit(2, 1)};
    std::vector<std::vector<ProportionEstimate>> est;
    Controller ctrl(*r.model, r.structure->targets);
    ClosedLoop loop{*r.model, *r.partition, ctrl, r.policy, r.spec()};
    const auto rows = safety_fraction_experiment(loop, {0.9, 1.0}, sw.alphas, 2000, 11, 0, &est);

    std::printf("\nregion  center   lambda   empirical(a=0.9)  empirical(a=1.0)\n");
    std::size_t k = 0;
    for (std::size_t s = 1; s < r.partition->num_states(); ++s) {
        const double c = r.partition->region(s).center()[0];
        if (r.lambda(s) > 0.0) {
            std::printf("%6zu  %6.2f   %.4f   %.4f            %.4f\n", s, c, r.lambda(s), est[0][k].estimate, est[1][k].estimate);
            ++k;
        } else {
            std::printf("%6zu  %6.2f   %.4f   -                 -\n", s, c, r.lambda(s));
        }
    }
    for (const auto& row : rows) std::printf("a=%.1f: %zu of %zu regions consistent with lambda\n", row.parameter,
                                             row.states_tested - row.states_unsafe, row.states_tested);
}
