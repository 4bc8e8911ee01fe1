// Gain tuning helper. Evaluates a controller gain set in closed loop
// (altitude settle time after the takeoff ramp, setpoint tracking RMSE,
// saturation events) and can sweep scale factors around the configured
// gains. The shipped defaults were picked with this tool and then frozen.

#include "CLI11.hpp"

#include "noninertial/harness.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace noninertial;

namespace {

struct Outcome {
    double settle_time;    // first time |z - alt| stays inside 0.05 m
    double tracking_rmse;  // hover window
    double worst_dz;       // after settle
    int saturation;
};

Outcome evaluate(const std::string& config_path, const std::string& scenario_path, uint64_t seed) {
    RunConfig rc;
    rc.scenario_path = scenario_path;
    rc.config_path = config_path;
    rc.estimator = EstimatorChoice::ekfui;
    rc.seed = seed;
    const RunResult r = run_scenario(rc);

    const ScenarioConfig sc = load_scenario(scenario_path);
    const double alt = sc.hover_altitude;
    const double land_start = sc.duration - sc.landing_ramp - 0.5;

    double settle = -1.0;
    double worst_after = 0.0;
    for (std::size_t i = 0; i < r.truth.t.size(); ++i) {
        const double t = r.truth.t[i];
        if (t > land_start) break;
        const double dz = std::abs(r.truth.pos[i].z() - alt);
        if (settle < 0.0 && dz <= 0.05) {
            settle = t;
        } else if (settle >= 0.0 && dz > 0.05) {
            settle = -1.0;  // left the band, keep looking
        }
        if (settle >= 0.0 && t > settle) worst_after = std::max(worst_after, dz);
    }
    return {settle, r.metrics.tracking_rmse, worst_after, r.metrics.saturation_events};
}

std::string scaled_config(const std::string& base_path, double horiz_scale, double vert_scale) {
    const AppConfig app = load_app_config(base_path);
    std::ifstream in(base_path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();

    auto replace_value = [&text](const std::string& key, double value) {
        const auto pos = text.find(key);
        if (pos == std::string::npos) return;
        const auto eq = text.find('=', pos);
        auto end = text.find('\n', eq);
        auto hash = text.find('#', eq);
        if (hash != std::string::npos && hash < end) end = hash;
        char buf[64];
        std::snprintf(buf, sizeof(buf), " %.6g ", value);
        text = text.substr(0, eq + 1) + buf + text.substr(end);
    };
    replace_value("controller.kpxy", app.gains.kPxy * horiz_scale);
    replace_value("controller.vel_x.kp", app.gains.vel_x.kP * horiz_scale);
    replace_value("controller.vel_y.kp", app.gains.vel_y.kP * horiz_scale);
    replace_value("controller.kpz", app.gains.kPz * vert_scale);
    replace_value("controller.vel_z.kp", app.gains.vel_z.kP * vert_scale);
    // keep the thrust curve reachable from the temp location
    const auto curve_pos = text.find("vehicle.thrust_curve_file");
    if (curve_pos != std::string::npos) {
        const auto eq = text.find('=', curve_pos);
        const auto end = text.find('\n', eq);
        const std::string abs_curve = std::filesystem::absolute(app.thrust_curve_file).string();
        text = text.substr(0, eq + 1) + " " + abs_curve + text.substr(end);
    }

    const std::string path =
        (std::filesystem::temp_directory_path() / "nisim_tune.cfg").string();
    std::ofstream out(path);
    out << text;
    return path;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Closed-loop gain evaluation / sweep"};
    std::string config = "config/defaults.cfg";
    std::string scenario = "config/scenarios/stationary.scn";
    uint64_t seed = 42;
    bool sweep = false;
    app.add_option("--config", config, "Base config file");
    app.add_option("--scenario", scenario, "Scenario used for evaluation");
    app.add_option("--seed", seed, "RNG seed");
    app.add_flag("--sweep", sweep, "Sweep scale factors around the configured gains");
    CLI11_PARSE(app, argc, argv);

    try {
        if (!sweep) {
            const Outcome o = evaluate(config, scenario, seed);
            std::printf("settle %.2f s, tracking rmse %.4f m, worst dz after settle %.3f m, "
                        "saturation events %d\n",
                        o.settle_time, o.tracking_rmse, o.worst_dz, o.saturation);
            return 0;
        }
        std::printf("%-8s %-8s | %-9s %-14s %-9s %s\n", "h_scale", "v_scale", "settle[s]",
                    "tracking[m]", "worst_dz", "saturation");
        for (double h : {0.5, 0.75, 1.0, 1.5, 2.0}) {
            for (double v : {0.5, 0.75, 1.0, 1.5, 2.0}) {
                const std::string cfg = scaled_config(config, h, v);
                const Outcome o = evaluate(cfg, scenario, seed);
                std::printf("%-8.2f %-8.2f | %-9.2f %-14.4f %-9.3f %d\n", h, v, o.settle_time,
                            o.tracking_rmse, o.worst_dz, o.saturation);
            }
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
