#include "noninertial/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace noninertial {

namespace {

// Regularized lower incomplete gamma P(a, x), series for x < a+1 and
// continued fraction (modified Lentz) otherwise.
double gammp(double a, double x) {
    if (x < 0.0 || a <= 0.0) {
        throw std::invalid_argument("gammp: requires x >= 0 and a > 0");
    }
    if (x == 0.0) return 0.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a;
        double sum = 1.0 / a;
        double del = sum;
        for (int n = 0; n < 500; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15) break;
        }
        return sum * std::exp(-x + a * std::log(x) - gln);
    }
    double b = x + 1.0 - a;
    double c = 1e300;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return 1.0 - std::exp(-x + a * std::log(x) - gln) * h;
}

}  // namespace

double chi2_cdf(double x, double dof) {
    if (x <= 0.0) return 0.0;
    return gammp(0.5 * dof, 0.5 * x);
}

double chi2_quantile(double p, double dof) {
    if (!(p > 0.0) || !(p < 1.0) || !(dof > 0.0)) {
        throw std::invalid_argument("chi2_quantile: requires p in (0,1) and dof > 0");
    }
    double lo = 0.0;
    double hi = dof + 20.0 * std::sqrt(2.0 * dof) + 100.0;
    while (chi2_cdf(hi, dof) < p) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (chi2_cdf(mid, dof) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-12 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
}

std::pair<double, double> chi2_central_interval(double prob, double dof) {
    return {chi2_quantile(0.5 * (1.0 - prob), dof), chi2_quantile(0.5 * (1.0 + prob), dof)};
}

namespace {

Vec3 rmse3(const std::vector<Vec3>& err) {
    Vec3 acc = Vec3::Zero();
    for (const auto& e : err) acc += e.cwiseProduct(e);
    if (!err.empty()) acc /= static_cast<double>(err.size());
    return acc.cwiseSqrt();
}

}  // namespace

EstimatorMetrics compute_estimator_metrics(const TruthTrace& truth, const EstimatorTrace& est, int dof,
                                           double window_start, double window_end) {
    const std::size_t n = truth.t.size();
    if (truth.pos.size() != n || truth.vel.size() != n || truth.true_d.size() != n) {
        throw AlignmentError("compute_estimator_metrics: truth trace columns have mismatched lengths");
    }
    if (est.t.size() != n || est.pos.size() != n || est.vel.size() != n || est.nees.size() != n) {
        std::ostringstream oss;
        oss << "compute_estimator_metrics: estimate trace (" << est.t.size()
            << " samples) does not align with truth (" << n << ")";
        throw AlignmentError(oss.str());
    }

    EstimatorMetrics m;
    m.dof = dof;
    m.has_dhat = !est.dhat.empty();
    if (m.has_dhat && est.dhat.size() != n) {
        throw AlignmentError("compute_estimator_metrics: dhat series misaligned");
    }

    const auto [lo, hi] = chi2_central_interval(0.95, static_cast<double>(dof));

    std::vector<Vec3> pos_err, vel_err, d_err;
    Vec3 tv = Vec3::Zero();
    bool have_prev_vel = false;
    Vec3 prev_vel = Vec3::Zero();
    double nees_sum = 0.0;
    std::size_t nees_in = 0, count = 0;

    for (std::size_t k = 0; k < n; ++k) {
        if (truth.t[k] < window_start || truth.t[k] > window_end) continue;
        pos_err.push_back(est.pos[k] - truth.pos[k]);
        vel_err.push_back(est.vel[k] - truth.vel[k]);
        if (m.has_dhat) d_err.push_back(est.dhat[k] - truth.true_d[k]);
        if (have_prev_vel) tv += (est.vel[k] - prev_vel).cwiseAbs();
        prev_vel = est.vel[k];
        have_prev_vel = true;
        nees_sum += est.nees[k];
        if (est.nees[k] >= lo && est.nees[k] <= hi) ++nees_in;
        ++count;
    }

    m.samples = count;
    m.pos_rmse = rmse3(pos_err);
    m.vel_rmse = rmse3(vel_err);
    if (m.has_dhat) m.dhat_rmse = rmse3(d_err);
    m.vel_total_variation = tv;
    if (count > 0) {
        m.nees_mean = nees_sum / static_cast<double>(count);
        m.nees_coverage = static_cast<double>(nees_in) / static_cast<double>(count);
    }
    return m;
}

RunMetrics compute_metrics(const TruthTrace& truth, const EstimatorTrace& ekfui_trace,
                           const EstimatorTrace& ekf_trace, double window_start, double window_end) {
    RunMetrics m;
    m.window_start = window_start;
    m.window_end = window_end;
    if (truth.t.empty()) return m;
    if (!ekfui_trace.t.empty()) {
        m.ekfui = compute_estimator_metrics(truth, ekfui_trace, 9, window_start, window_end);
    }
    if (!ekf_trace.t.empty()) {
        m.ekf = compute_estimator_metrics(truth, ekf_trace, 6, window_start, window_end);
    }
    m.tracking_rmse = compute_tracking_rmse(truth, window_start, window_end);
    return m;
}

double compute_tracking_rmse(const TruthTrace& truth, double window_start, double window_end) {
    const std::size_t n = truth.t.size();
    if (truth.setpoint.size() != n || truth.pos.size() != n) {
        throw AlignmentError("compute_tracking_rmse: setpoint series misaligned");
    }
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (truth.t[k] < window_start || truth.t[k] > window_end) continue;
        acc += (truth.pos[k] - truth.setpoint[k]).squaredNorm();
        ++count;
    }
    return count ? std::sqrt(acc / static_cast<double>(count)) : 0.0;
}

}  // namespace noninertial
