#pragma once

// Run metrics: RMSE against truth, NEES consistency, smoothness proxies.
// Chi-square quantiles come from the regularized incomplete gamma function
// so the consistency bounds need no table lookups.

#include "noninertial/types.hpp"

#include <optional>
#include <vector>

namespace noninertial {

double chi2_cdf(double x, double dof);
/// Inverse CDF via bisection; p in (0, 1).
double chi2_quantile(double p, double dof);
/// Central two-sided interval covering `prob` mass: quantiles at (1-prob)/2
/// and (1+prob)/2.
std::pair<double, double> chi2_central_interval(double prob, double dof);

/// Normalized estimation error squared, e' P^-1 e.
template <typename VecT, typename MatT>
double nees(const VecT& error, const MatT& covariance) {
    return error.dot(covariance.llt().solve(error));
}

/// Truth samples at the filter rate, relative (platform) frame.
struct TruthTrace {
    std::vector<double> t;
    std::vector<Vec3> pos;
    std::vector<Vec3> vel;
    std::vector<Vec3> true_d;  // platform acceleration in the platform frame
    std::vector<Vec3> setpoint;
};

/// One estimator's outputs at the same instants.
struct EstimatorTrace {
    std::vector<double> t;
    std::vector<Vec3> pos;
    std::vector<Vec3> vel;
    std::vector<Vec3> dhat;    // empty for the baseline filter
    std::vector<double> nees;  // per-step NEES vs truth
    std::vector<double> nis;   // innovation NIS (nan when no update)
};

struct EstimatorMetrics {
    Vec3 pos_rmse = Vec3::Zero();
    Vec3 vel_rmse = Vec3::Zero();
    Vec3 dhat_rmse = Vec3::Zero();
    Vec3 vel_total_variation = Vec3::Zero();
    double nees_mean{0.0};
    double nees_coverage{0.0};  // fraction of steps inside the 95% chi-square bounds
    bool has_dhat{false};
    int dof{0};
    std::size_t samples{0};
};

struct RunMetrics {
    std::optional<EstimatorMetrics> ekfui;
    std::optional<EstimatorMetrics> ekf;
    double tracking_rmse{0.0};  // truth position vs setpoint, horizontal+vertical norm
    int saturation_events{0};
    int stale_sync_events{0};
    std::uint64_t stream_checksum{0};
    double window_start{0.0};
    double window_end{0.0};
};

/// RMSE and consistency over [window_start, window_end]. The traces must be
/// time-aligned samplewise; mismatched lengths raise AlignmentError. `dof`
/// sets the chi-square bounds for the coverage fraction (9 for the EKF-UI,
/// 6 for the baseline).
EstimatorMetrics compute_estimator_metrics(const TruthTrace& truth, const EstimatorTrace& est, int dof,
                                           double window_start, double window_end);

/// Setpoint tracking RMSE of the truth over the window.
double compute_tracking_rmse(const TruthTrace& truth, double window_start, double window_end);

/// Assemble the full metrics block from time-aligned traces. Either estimator
/// trace may be empty (its slot stays unset).
RunMetrics compute_metrics(const TruthTrace& truth, const EstimatorTrace& ekfui_trace,
                           const EstimatorTrace& ekf_trace, double window_start, double window_end);

}  // namespace noninertial
