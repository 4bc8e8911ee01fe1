#pragma once

// Closed-loop scenario runner. Wires dynamics, actuation, controller, world
// and both estimators; writes per-run CSV logs plus a metrics summary.
//
// Truth is integrated in the world frame; relative quantities (what the
// cart-mounted measurement stream and the filters see) are derived exactly,
// including the frame-rotation term while the platform yaw ramps.
//
// Determinism: measurement sample times and noise draws are pre-generated
// from the run seed, independent of the trajectory, so paired runs with the
// same seed consume identical noise realizations. Monte-Carlo repetition k
// uses derive_seed(seed, k); the drone and platform streams use
// derive_seed(run_seed, 1) and derive_seed(run_seed, 2).

#include "noninertial/config.hpp"
#include "noninertial/metrics.hpp"
#include "noninertial/world.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace noninertial {

enum class EstimatorChoice { ekf, ekfui, both };

std::string estimator_name(EstimatorChoice c);
EstimatorChoice estimator_from_name(const std::string& name);

struct RunConfig {
    std::string scenario_path;
    std::string config_path;
    EstimatorChoice estimator{EstimatorChoice::both};
    std::uint64_t seed{42};
    double dt_sim{-1.0};    // <= 0: take from the vehicle config
    double duration{-1.0};  // < 0: take from the scenario; 0 is a valid degenerate run
    std::string output_dir;  // empty: no files written
    int repetitions{1};

    void validate() const;
};

struct RunEvent {
    double time{0.0};
    std::string type;
    std::string detail;
};

struct RunResult {
    RunMetrics metrics;
    std::string run_dir;  // empty when no logs were written
    std::vector<RunEvent> events;
    // In-memory traces at the filter rate (same data as timeseries.csv).
    TruthTrace truth;
    EstimatorTrace ekfui_trace;  // empty when the EKF-UI did not run
    EstimatorTrace ekf_trace;    // empty when the baseline did not run
    std::vector<Vec3> dhat_sigma;  // sqrt of the d-block posterior variances
};

/// One closed-loop run. In `both` mode the two filters consume the identical
/// measurement stream and the EKF-UI closes the loop.
RunResult run_scenario(const RunConfig& cfg);

/// cfg.repetitions runs with seeds derive_seed(cfg.seed, k), k = 0..reps-1.
/// Logs land in <output_dir>/rep000, rep001, ...
std::vector<RunResult> run_repetitions(const RunConfig& cfg);

struct SuiteConfig {
    std::vector<std::string> scenario_paths;
    std::string config_path;
    std::uint64_t seed{42};
    int repetitions{3};
    std::string output_dir;
};

/// All scenarios x both estimator feedbacks x repetitions; writes per-run
/// logs and a suite summary.csv. Byte-identical for identical inputs.
void run_suite(const SuiteConfig& cfg);

/// Recompute RunMetrics from a run directory's timeseries.csv.
RunMetrics recompute_metrics(const std::string& run_dir);

/// Figure-ready CSV bundles (positions, velocities, cart motion, trajectory)
/// from a run directory's timeseries.csv.
void emit_plot_data(const std::string& run_dir, const std::string& out_dir);

/// Write the metrics block of metrics.csv; shared by run and `metrics`.
void write_metrics_file(const std::string& path, const RunMetrics& m);

}  // namespace noninertial
