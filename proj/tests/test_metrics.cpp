#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "noninertial/metrics.hpp"
#include "noninertial/world.hpp"

#include <cmath>

using namespace noninertial;

namespace {

TruthTrace flat_truth(int n, double Ts) {
    TruthTrace t;
    for (int k = 0; k < n; ++k) {
        t.t.push_back(k * Ts);
        t.pos.push_back(Vec3(0.0, 0.0, 0.35));
        t.vel.push_back(Vec3::Zero());
        t.true_d.push_back(Vec3::Zero());
        t.setpoint.push_back(Vec3(0.0, 0.0, 0.35));
    }
    return t;
}

EstimatorTrace exact_estimate(const TruthTrace& t) {
    EstimatorTrace e;
    e.t = t.t;
    e.pos = t.pos;
    e.vel = t.vel;
    e.dhat = t.true_d;
    e.nees.assign(t.t.size(), 9.0);
    e.nis.assign(t.t.size(), 3.0);
    return e;
}

}  // namespace

TEST_CASE("chi2 quantiles against textbook values") {
    CHECK(chi2_quantile(0.975, 9) == doctest::Approx(19.0228).epsilon(1e-4));
    CHECK(chi2_quantile(0.025, 9) == doctest::Approx(2.7004).epsilon(1e-4));
    CHECK(chi2_quantile(0.95, 3) == doctest::Approx(7.8147).epsilon(1e-4));
    CHECK(chi2_quantile(0.05, 10) == doctest::Approx(3.9403).epsilon(1e-4));
    CHECK(chi2_quantile(0.975, 6) == doctest::Approx(14.4494).epsilon(1e-4));
    CHECK(chi2_quantile(0.025, 6) == doctest::Approx(1.2373).epsilon(1e-3));
    const auto [lo, hi] = chi2_central_interval(0.95, 9.0);
    CHECK(lo == doctest::Approx(2.7004).epsilon(1e-4));
    CHECK(hi == doctest::Approx(19.0228).epsilon(1e-4));
}

TEST_CASE("chi2 cdf/quantile round trip") {
    for (double dof : {1.0, 3.0, 9.0, 50.0, 450.0}) {
        for (double p : {0.025, 0.5, 0.9, 0.975}) {
            CHECK(chi2_cdf(chi2_quantile(p, dof), dof) == doctest::Approx(p).epsilon(1e-9));
        }
    }
}

TEST_CASE("nees of a whitened error") {
    Mat3 P = Mat3::Identity() * 4.0;
    Vec3 e(2.0, 0.0, 0.0);
    CHECK(nees(e, P) == doctest::Approx(1.0));
}

TEST_CASE("compute_estimator_metrics: exact estimate gives zero RMSE") {
    const TruthTrace t = flat_truth(600, 0.01);
    const EstimatorTrace e = exact_estimate(t);
    const EstimatorMetrics m = compute_estimator_metrics(t, e, 9, 0.0, 10.0);
    CHECK(m.pos_rmse.norm() == 0.0);
    CHECK(m.vel_rmse.norm() == 0.0);
    CHECK(m.dhat_rmse.norm() == 0.0);
    CHECK(m.nees_mean == doctest::Approx(9.0));
    CHECK(m.nees_coverage == doctest::Approx(1.0));
}

TEST_CASE("compute_estimator_metrics: constant offset arithmetic") {
    const TruthTrace t = flat_truth(500, 0.01);
    EstimatorTrace e = exact_estimate(t);
    for (auto& p : e.pos) p.x() += 0.1;
    const EstimatorMetrics m = compute_estimator_metrics(t, e, 9, 0.0, 10.0);
    CHECK(m.pos_rmse.x() == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(m.pos_rmse.y() == 0.0);
}

TEST_CASE("compute_estimator_metrics: white-noise RMSE statistical oracle") {
    const TruthTrace t = flat_truth(4000, 0.01);
    EstimatorTrace e = exact_estimate(t);
    GaussianSampler rng(2718);
    for (auto& p : e.pos) p += rng.next_vec3(0.02);
    const EstimatorMetrics m = compute_estimator_metrics(t, e, 9, 0.0, 100.0);
    for (int i = 0; i < 3; ++i) {
        CHECK(m.pos_rmse(i) == doctest::Approx(0.02).epsilon(0.10));
    }
}

TEST_CASE("compute_estimator_metrics: window excludes transients") {
    const TruthTrace t = flat_truth(1000, 0.01);
    EstimatorTrace e = exact_estimate(t);
    // Garbage outside [3, 7].
    for (std::size_t k = 0; k < e.pos.size(); ++k) {
        if (t.t[k] < 3.0 || t.t[k] > 7.0) e.pos[k] = Vec3(100.0, 100.0, 100.0);
    }
    const EstimatorMetrics m = compute_estimator_metrics(t, e, 9, 3.0, 7.0);
    CHECK(m.pos_rmse.norm() == 0.0);
    CHECK(m.samples == 401);
}

TEST_CASE("compute_estimator_metrics: misaligned series raise") {
    const TruthTrace t = flat_truth(100, 0.01);
    EstimatorTrace e = exact_estimate(t);
    e.pos.pop_back();
    CHECK_THROWS_AS(compute_estimator_metrics(t, e, 9, 0.0, 1.0), AlignmentError);
}

TEST_CASE("velocity total variation accumulates absolute steps") {
    const TruthTrace t = flat_truth(4, 1.0);
    EstimatorTrace e = exact_estimate(t);
    e.vel[1] = Vec3(1.0, 0.0, 0.0);
    e.vel[2] = Vec3(-1.0, 0.0, 0.0);
    e.vel[3] = Vec3(0.0, 0.0, 0.0);
    const EstimatorMetrics m = compute_estimator_metrics(t, e, 9, 0.0, 10.0);
    CHECK(m.vel_total_variation.x() == doctest::Approx(1.0 + 2.0 + 1.0));
}

TEST_CASE("tracking rmse against the setpoint") {
    TruthTrace t = flat_truth(100, 0.01);
    for (auto& p : t.pos) p.z() += 0.05;
    CHECK(compute_tracking_rmse(t, 0.0, 1.0) == doctest::Approx(0.05).epsilon(1e-12));
}
