// nisim: scenario runner CLI.
//
//   nisim run      one scenario, one or more repetitions
//   nisim suite    every scenario x both estimator feedbacks x repetitions
//   nisim metrics  recompute the metrics block from a run's timeseries.csv
//   nisim plotdata figure-ready CSV bundles from a run directory
//
// NONINERTIAL_OUTPUT_ROOT overrides the root for relative output paths.

#include "CLI11.hpp"

#include "noninertial/harness.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace {

std::string resolve_output(const std::string& path) {
    if (path.empty() || path.front() == '/') return path;
    if (const char* root = std::getenv("NONINERTIAL_OUTPUT_ROOT")) {
        return std::string(root) + "/" + path;
    }
    return path;
}

void print_metrics(const noninertial::RunMetrics& m) {
    auto line = [](const std::string& name, const noninertial::Vec3& v) {
        std::cout << "  " << name << ": x=" << v.x() << " y=" << v.y() << " z=" << v.z() << "\n";
    };
    if (m.ekfui) {
        std::cout << "EKF-UI:\n";
        line("pos rmse [m]", m.ekfui->pos_rmse);
        line("vel rmse [m/s]", m.ekfui->vel_rmse);
        line("dhat rmse [m/s^2]", m.ekfui->dhat_rmse);
        std::cout << "  nees mean=" << m.ekfui->nees_mean << " coverage=" << m.ekfui->nees_coverage
                  << "\n";
    }
    if (m.ekf) {
        std::cout << "EKF baseline:\n";
        line("pos rmse [m]", m.ekf->pos_rmse);
        line("vel rmse [m/s]", m.ekf->vel_rmse);
        std::cout << "  nees mean=" << m.ekf->nees_mean << " coverage=" << m.ekf->nees_coverage << "\n";
    }
    std::cout << "tracking rmse [m]: " << m.tracking_rmse << "\n";
    std::cout << "saturation events: " << m.saturation_events
              << ", stale sync events: " << m.stale_sync_events << "\n";
    std::cout << "stream checksum: " << m.stream_checksum << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale quadrotor-on-a-moving-platform simulation & estimation workbench"};
    app.require_subcommand(1);

    std::string scenario, config = "config/defaults.cfg", output, estimator = "both", run_dir;
    std::uint64_t seed = 42;
    int repetitions = 1;
    double duration = -1.0;
    std::vector<std::string> scenarios;

    auto* run = app.add_subcommand("run", "Run one scenario");
    run->add_option("--scenario", scenario, "Scenario file")->required();
    run->add_option("--config", config, "Vehicle/filter/controller config file");
    run->add_option("--estimator", estimator, "ekf | ekfui | both");
    run->add_option("--seed", seed, "Base RNG seed");
    run->add_option("--repetitions", repetitions, "Monte-Carlo repetitions");
    run->add_option("--duration", duration, "Override scenario duration [s]");
    run->add_option("--out", output, "Output directory")->required();

    auto* suite = app.add_subcommand("suite", "Run all scenarios, both estimators");
    suite->add_option("--scenarios", scenarios, "Scenario files")->required()->expected(-1);
    suite->add_option("--config", config, "Vehicle/filter/controller config file");
    suite->add_option("--seed", seed, "Base RNG seed");
    suite->add_option("--repetitions", repetitions, "Repetitions per scenario");
    suite->add_option("--out", output, "Output directory")->required();

    auto* metrics = app.add_subcommand("metrics", "Recompute metrics from a run directory");
    metrics->add_option("--run-dir", run_dir, "Run directory containing timeseries.csv")->required();
    metrics->add_option("--out", output, "Optional file for the recomputed metrics block");

    auto* plotdata = app.add_subcommand("plotdata", "Emit figure CSV bundles from a run directory");
    plotdata->add_option("--run-dir", run_dir, "Run directory containing timeseries.csv")->required();
    plotdata->add_option("--out", output, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            noninertial::RunConfig cfg;
            cfg.scenario_path = scenario;
            cfg.config_path = config;
            cfg.estimator = noninertial::estimator_from_name(estimator);
            cfg.seed = seed;
            cfg.duration = duration;
            cfg.repetitions = repetitions;
            cfg.output_dir = resolve_output(output);
            if (repetitions == 1) {
                const auto res = noninertial::run_scenario(cfg);
                print_metrics(res.metrics);
                std::cout << "logs: " << res.run_dir << "\n";
            } else {
                const auto results = noninertial::run_repetitions(cfg);
                std::cout << results.size() << " repetitions under " << cfg.output_dir << "\n";
            }
        } else if (suite->parsed()) {
            noninertial::SuiteConfig cfg;
            cfg.scenario_paths = scenarios;
            cfg.config_path = config;
            cfg.seed = seed;
            cfg.repetitions = repetitions;
            cfg.output_dir = resolve_output(output);
            noninertial::run_suite(cfg);
            std::cout << "suite summary: " << cfg.output_dir << "/summary.csv\n";
        } else if (metrics->parsed()) {
            const auto m = noninertial::recompute_metrics(run_dir);
            print_metrics(m);
            if (!output.empty()) {
                noninertial::write_metrics_file(resolve_output(output), m);
            }
        } else if (plotdata->parsed()) {
            noninertial::emit_plot_data(run_dir, resolve_output(output));
            std::cout << "plot bundles under " << resolve_output(output) << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
