#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "noninertial/harness.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace noninertial;

namespace {

const std::string kConfigDir = NONINERTIAL_CONFIG_DIR;

std::string out_dir(const std::string& leaf) {
    const std::string d = "harness_test_out/" + leaf;
    std::filesystem::remove_all(d);
    return d;
}

RunConfig base_config(const std::string& scenario, const std::string& leaf) {
    RunConfig cfg;
    cfg.scenario_path = kConfigDir + "/scenarios/" + scenario + ".scn";
    cfg.config_path = kConfigDir + "/defaults.cfg";
    cfg.estimator = EstimatorChoice::both;
    cfg.seed = 42;
    cfg.output_dir = out_dir(leaf);
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("world-frame simulation agrees with direct relative-frame integration") {
    // Translation-only scenario: integrating the non-inertial dynamics in the
    // cart frame must match integrating in the world frame and transforming.
    const AppConfig app = load_app_config(kConfigDir + "/defaults.cfg");
    PlatformMotion pm;
    pm.schedule = {{0.5, 1.5, Vec3(0.4, -0.2, 0.0)}, {1.5, 2.5, Vec3(-0.4, 0.2, 0.0)}};

    const ControlInput u{app.params.g, 0.0, 0.0, 0.0};
    const double dt = 0.002;

    FullState world;  // hovers at the origin
    FullState rel;
    double max_gap = 0.0;
    for (int k = 0; k < 1500; ++k) {
        const double t = k * dt;
        const PlatformState cart = platform_state_at(pm, t);
        const PlatformAcceleration pa{cart.accel.x(), cart.accel.y(), cart.accel.z()};
        world = integrate_step(
            world, [&](const Vec12& s) { return inertial_derivative(s, u, app.params); }, dt);
        rel = integrate_step(
            rel, [&](const Vec12& s) { return noninertial_derivative(s, u, pa, app.params); }, dt);

        const PlatformState cart_next = platform_state_at(pm, t + dt);
        const Vec3 expect_pos = world.position() - cart_next.pos;
        const Vec3 expect_vel = world.velocity() - cart_next.vel;
        max_gap = std::max(max_gap, (rel.position() - expect_pos).norm());
        max_gap = std::max(max_gap, (rel.velocity() - expect_vel).norm());
    }
    CHECK(max_gap < 1e-9);
}

TEST_CASE("run_scenario: zero duration gives an empty series and zero metrics") {
    RunConfig cfg = base_config("stationary", "zero_duration");
    cfg.duration = 0.0;
    const RunResult res = run_scenario(cfg);
    CHECK(res.truth.t.empty());
    CHECK(!res.metrics.ekfui.has_value());
    CHECK(!res.metrics.ekf.has_value());
    CHECK(res.metrics.tracking_rmse == 0.0);
    CHECK(std::filesystem::exists(cfg.output_dir + "/timeseries.csv"));
    CHECK(std::filesystem::exists(cfg.output_dir + "/metrics.csv"));
}

TEST_CASE("run_scenario: stationary run, both estimators comparable") {
    RunConfig cfg = base_config("stationary", "stationary_both");
    const RunResult res = run_scenario(cfg);

    REQUIRE(res.metrics.ekfui.has_value());
    REQUIRE(res.metrics.ekf.has_value());
    // Flight actually reaches and holds the hover altitude.
    CHECK(res.metrics.tracking_rmse < 0.05);
    // The two estimators are comparable when nothing moves.
    for (int i = 0; i < 3; ++i) {
        const double ratio = res.metrics.ekfui->pos_rmse(i) / res.metrics.ekf->pos_rmse(i);
        CHECK(ratio > 0.5);
        CHECK(ratio < 2.0);
    }
    CHECK(res.metrics.ekfui->pos_rmse.norm() < 0.01);
    CHECK(res.metrics.stream_checksum != 0);
}

TEST_CASE("stationary parity: pooled RMSE ratios stay within 1.1") {
    // Paired Monte-Carlo over fixed seeds; the filters consume identical
    // streams, so the ratio isolates the estimator difference.
    double up = 0.0, ep = 0.0, uv = 0.0, ev = 0.0;
    for (int s = 0; s < 10; ++s) {
        RunConfig cfg = base_config("stationary", "parity" + std::to_string(s));
        cfg.output_dir.clear();  // metrics only
        cfg.seed = derive_seed(1000, static_cast<std::uint64_t>(s));
        const RunResult r = run_scenario(cfg);
        up += r.metrics.ekfui->pos_rmse.squaredNorm();
        ep += r.metrics.ekf->pos_rmse.squaredNorm();
        uv += r.metrics.ekfui->vel_rmse.squaredNorm();
        ev += r.metrics.ekf->vel_rmse.squaredNorm();
    }
    const double pos_ratio = std::sqrt(up / ep);
    const double vel_ratio = std::sqrt(uv / ev);
    CHECK(pos_ratio < 1.1);
    CHECK(pos_ratio > 1.0 / 1.1);
    CHECK(vel_ratio < 1.1);
    CHECK(vel_ratio > 1.0 / 1.1);
}

TEST_CASE("run_scenario: forward motion favors the EKF-UI on x velocity") {
    RunConfig cfg = base_config("x_forward_moderate", "forward_both");
    const RunResult res = run_scenario(cfg);
    REQUIRE(res.metrics.ekfui.has_value());
    REQUIRE(res.metrics.ekf.has_value());
    CHECK(res.metrics.ekfui->vel_rmse.x() < res.metrics.ekf->vel_rmse.x());
    // d1 is actually being estimated: its RMSE beats the no-estimate baseline
    // (true d1 is 0.3/-0.3 over 8 of the windowed seconds).
    CHECK(res.metrics.ekfui->dhat_rmse.x() < 0.2);
}

TEST_CASE("run_scenario: determinism is byte-exact") {
    RunConfig a = base_config("x_forward_moderate", "det_a");
    RunConfig b = base_config("x_forward_moderate", "det_b");
    const RunResult ra = run_scenario(a);
    const RunResult rb = run_scenario(b);
    CHECK(slurp(a.output_dir + "/timeseries.csv") == slurp(b.output_dir + "/timeseries.csv"));
    CHECK(slurp(a.output_dir + "/metrics.csv") == slurp(b.output_dir + "/metrics.csv"));
    CHECK(ra.metrics.stream_checksum == rb.metrics.stream_checksum);

    RunConfig c = base_config("x_forward_moderate", "det_c");
    c.seed = 43;
    const RunResult rc = run_scenario(c);
    CHECK(rc.metrics.stream_checksum != ra.metrics.stream_checksum);
}

TEST_CASE("run_scenario: paired feedback runs share the measurement noise sequence") {
    // Same seed, different in-loop estimator: trajectories differ, but the
    // pre-drawn noise is identical, so stream checksums differ only through
    // the trajectory (sanity: both runs complete and the seeds line up).
    RunConfig ui = base_config("x_forward_moderate", "fb_ui");
    ui.estimator = EstimatorChoice::ekfui;
    RunConfig ek = base_config("x_forward_moderate", "fb_ekf");
    ek.estimator = EstimatorChoice::ekf;
    const RunResult r_ui = run_scenario(ui);
    const RunResult r_ek = run_scenario(ek);
    REQUIRE(r_ui.metrics.ekfui.has_value());
    REQUIRE(!r_ui.metrics.ekf.has_value());
    REQUIRE(!r_ek.metrics.ekfui.has_value());
    REQUIRE(r_ek.metrics.ekf.has_value());
    CHECK(r_ui.metrics.tracking_rmse > 0.0);
    CHECK(r_ek.metrics.tracking_rmse > 0.0);
}

TEST_CASE("run_scenario: stale synchronization is counted, not fatal") {
    // Slow platform stream: most drone samples have no cart pose within the
    // window.
    const std::string scn = "/tmp/noninertial_sparse_platform.scn";
    {
        std::ofstream os(scn);
        os << "schema_version = 1\nname = sparse\nprofile = stationary\nduration = 6\n"
           << "stream.platform.rate = 1\nstream.platform.phase = 0.0\n";
    }
    RunConfig cfg;
    cfg.scenario_path = scn;
    cfg.config_path = kConfigDir + "/defaults.cfg";
    cfg.output_dir = out_dir("sparse");
    const RunResult res = run_scenario(cfg);
    CHECK(res.metrics.stale_sync_events > 0);
    bool event_logged = false;
    for (const auto& e : res.events) {
        if (e.type == "stale_sync") event_logged = true;
    }
    CHECK(event_logged);
}

TEST_CASE("run_scenario: setpoint outside the flight volume is flagged") {
    const std::string scn = "/tmp/noninertial_high_hover.scn";
    {
        std::ofstream os(scn);
        os << "schema_version = 1\nname = high\nprofile = stationary\nduration = 6\n"
           << "hover_altitude = 0.6\n";  // inner half-height is 0.45
    }
    RunConfig cfg;
    cfg.scenario_path = scn;
    cfg.config_path = kConfigDir + "/defaults.cfg";
    cfg.output_dir = out_dir("high_hover");
    const RunResult res = run_scenario(cfg);
    bool flagged = false;
    for (const auto& e : res.events) {
        if (e.type == "setpoint_out_of_bounds") flagged = true;
    }
    CHECK(flagged);
}

TEST_CASE("run_scenario: filter divergence aborts with a partial log flushed") {
    // Zero R and zero P0 make the first innovation covariance singular.
    const std::string cfg_path = "/tmp/noninertial_divergent.cfg";
    {
        std::ifstream in(kConfigDir + "/defaults.cfg");
        std::stringstream ss;
        ss << in.rdbuf();
        std::string text = ss.str();
        auto replace_line = [&text](const std::string& key, const std::string& line) {
            const auto pos = text.find(key);
            REQUIRE(pos != std::string::npos);
            text = text.substr(0, pos) + line + text.substr(text.find('\n', pos));
        };
        replace_line("filter.r_diag", "filter.r_diag = 0 0 0");
        replace_line("filter.p0_diag", "filter.p0_diag = 0 0 0 0 0 0 0 0 0");
        replace_line("filter.q_core_diag", "filter.q_core_diag = 0 0 0 0 0 0");
        replace_line("filter.q_d_diag", "filter.q_d_diag = 0 0 0");
        replace_line("vehicle.thrust_curve_file",
                     "vehicle.thrust_curve_file = " + kConfigDir + "/thrust_curve.txt");
        std::ofstream os(cfg_path);
        os << text;
    }
    RunConfig cfg;
    cfg.scenario_path = kConfigDir + "/scenarios/stationary.scn";
    cfg.config_path = cfg_path;
    cfg.output_dir = out_dir("divergent");
    CHECK_THROWS_AS(run_scenario(cfg), FilterError);
    CHECK(std::filesystem::exists(cfg.output_dir + "/timeseries.csv"));
    CHECK(std::filesystem::exists(cfg.output_dir + "/error.txt"));
    const std::string err = slurp(cfg.output_dir + "/error.txt");
    CHECK(err.find("error = filter_diverged") != std::string::npos);
}

TEST_CASE("run_scenario: dt_sim coarser than Ts is rejected") {
    RunConfig cfg = base_config("stationary", "bad_dt");
    cfg.dt_sim = 0.02;  // Ts is 0.01
    CHECK_THROWS_AS(run_scenario(cfg), ConfigError);
    cfg.dt_sim = 0.003;  // does not divide Ts
    CHECK_THROWS_AS(run_scenario(cfg), ConfigError);
}

TEST_CASE("recompute_metrics matches the stored metrics") {
    RunConfig cfg = base_config("stationary", "recompute");
    const RunResult res = run_scenario(cfg);
    const RunMetrics again = recompute_metrics(cfg.output_dir);
    REQUIRE(again.ekfui.has_value());
    REQUIRE(again.ekf.has_value());
    CHECK((again.ekfui->pos_rmse - res.metrics.ekfui->pos_rmse).norm() < 1e-9);
    CHECK((again.ekf->vel_rmse - res.metrics.ekf->vel_rmse).norm() < 1e-9);
    CHECK(again.tracking_rmse == doctest::Approx(res.metrics.tracking_rmse).epsilon(1e-9));
    CHECK(again.ekfui->nees_coverage == doctest::Approx(res.metrics.ekfui->nees_coverage));
    CHECK(again.stream_checksum == res.metrics.stream_checksum);
    CHECK(again.saturation_events == res.metrics.saturation_events);
}

TEST_CASE("emit_plot_data produces the figure bundles") {
    RunConfig cfg = base_config("x_forward_moderate", "plotdata");
    run_scenario(cfg);
    const std::string plots = cfg.output_dir + "/plots";
    emit_plot_data(cfg.output_dir, plots);
    for (const std::string f : {"positions.csv", "velocities.csv", "cart.csv", "trajectory.csv"}) {
        CHECK(std::filesystem::exists(plots + "/" + f));
    }
    // Trajectory bundle carries a monotone index column.
    std::ifstream in(plots + "/trajectory.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("idx,t,", 0) == 0);
    long prev = -1, idx = 0;
    std::string line;
    while (std::getline(in, line)) {
        idx = std::strtol(line.c_str(), nullptr, 10);
        CHECK(idx == prev + 1);
        prev = idx;
    }
    CHECK(prev > 100);
}

TEST_CASE("ground-truth attitude ablation runs and tightens estimation") {
    const std::string cfg_path = "/tmp/noninertial_true_att.cfg";
    {
        std::ifstream in(kConfigDir + "/defaults.cfg");
        std::stringstream ss;
        ss << in.rdbuf();
        std::string text = ss.str();
        const auto pos = text.find("sim.use_true_attitude");
        REQUIRE(pos != std::string::npos);
        text = text.substr(0, pos) + "sim.use_true_attitude = true" +
               text.substr(text.find('\n', pos));
        const auto cpos = text.find("vehicle.thrust_curve_file");
        text = text.substr(0, cpos) +
               "vehicle.thrust_curve_file = " + kConfigDir + "/thrust_curve.txt" +
               text.substr(text.find('\n', cpos));
        std::ofstream os(cfg_path);
        os << text;
    }
    RunConfig ablated;
    ablated.scenario_path = kConfigDir + "/scenarios/stationary.scn";
    ablated.config_path = cfg_path;
    ablated.seed = 42;
    const RunResult with_truth = run_scenario(ablated);

    RunConfig normal = base_config("stationary", "att_ablation");
    normal.output_dir.clear();
    const RunResult with_estimate = run_scenario(normal);

    REQUIRE(with_truth.metrics.ekfui.has_value());
    // Feeding perfect attitude removes the thrust-projection error, so the
    // velocity estimates cannot get worse.
    CHECK(with_truth.metrics.ekfui->vel_rmse.norm() <=
          with_estimate.metrics.ekfui->vel_rmse.norm() * 1.05);
}

TEST_CASE("compute_metrics assembles only the traces it is given") {
    TruthTrace truth;
    EstimatorTrace ui, ekf;
    for (int k = 0; k < 10; ++k) {
        truth.t.push_back(0.01 * k);
        truth.pos.push_back(Vec3::Zero());
        truth.vel.push_back(Vec3::Zero());
        truth.true_d.push_back(Vec3::Zero());
        truth.setpoint.push_back(Vec3::Zero());
        ui.t.push_back(0.01 * k);
        ui.pos.push_back(Vec3::Zero());
        ui.vel.push_back(Vec3::Zero());
        ui.dhat.push_back(Vec3::Zero());
        ui.nees.push_back(9.0);
        ui.nis.push_back(3.0);
    }
    const RunMetrics m = compute_metrics(truth, ui, ekf, 0.0, 1.0);
    CHECK(m.ekfui.has_value());
    CHECK(!m.ekf.has_value());
    CHECK(m.ekfui->dof == 9);

    const RunMetrics empty = compute_metrics(TruthTrace{}, EstimatorTrace{}, EstimatorTrace{}, 0.0, 1.0);
    CHECK(!empty.ekfui.has_value());
    CHECK(empty.tracking_rmse == 0.0);
}

TEST_CASE("run_repetitions derives distinct seeds") {
    RunConfig cfg = base_config("stationary", "reps");
    cfg.repetitions = 3;
    cfg.duration = 6.0;
    const auto results = run_repetitions(cfg);
    REQUIRE(results.size() == 3);
    CHECK(results[0].metrics.stream_checksum != results[1].metrics.stream_checksum);
    CHECK(results[1].metrics.stream_checksum != results[2].metrics.stream_checksum);
    CHECK(std::filesystem::exists(cfg.output_dir + "/rep002/metrics.csv"));
}
