#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "noninertial/controller.hpp"

#include <cmath>

using namespace noninertial;

namespace {

ControllerGains default_gains() {
    ControllerGains g;
    g.kPxy = 1.5;
    g.kPz = 1.5;
    g.vel_x = {0.2, 0.05, 0.02, 0.05, 2.0};
    g.vel_y = {0.2, 0.05, 0.02, 0.05, 2.0};
    g.vel_z = {4.0, 2.0, 0.0, 0.05, 1.0};
    return g;
}

ThrustCurve curve() {
    return ThrustCurve({{0.0, 0.0}, {0.25, 0.11}, {0.5, 0.24}, {0.75, 0.41}, {1.0, 0.62}},
                       CurveInterp::MonotoneCubic);
}

constexpr double kMass = 0.033;
constexpr double kG = 9.81;

}  // namespace

TEST_CASE("pid_step: pure proportional") {
    PidGains g{2.5, 0.0, 0.0, 0.05, 10.0};
    PidState s;
    const auto [out, next] = pid_step(s, 0.4, g, 0.01);
    CHECK(out == 2.5 * 0.4);
    CHECK(next.initialized);
}

TEST_CASE("pid_step: integrator arithmetic under constant error") {
    PidGains g{0.0, 3.0, 0.0, 0.05, 100.0};
    PidState s;
    const double e = 0.2, dt = 0.01;
    double out = 0.0;
    const int n = 50;
    for (int k = 0; k < n; ++k) std::tie(out, s) = pid_step(s, e, g, dt);
    // Trapezoid of a constant is exact: kI * e * n * dt.
    CHECK(out == doctest::Approx(3.0 * e * n * dt).epsilon(1e-12));
}

TEST_CASE("pid_step: integrator clamps") {
    PidGains g{0.0, 1.0, 0.0, 0.05, 0.05};
    PidState s;
    double out = 0.0;
    for (int k = 0; k < 1000; ++k) std::tie(out, s) = pid_step(s, 1.0, g, 0.01);
    CHECK(out == doctest::Approx(0.05));
    CHECK(s.integral == doctest::Approx(0.05));
}

TEST_CASE("pid_step: matches an independent reference implementation") {
    // Reference discrete PID written from the difference equations directly.
    struct Ref {
        double integ = 0.0, prev = 0.0, dfilt = 0.0;
        bool first = true;
    } ref;
    PidGains g{1.2, 0.7, 0.3, 0.08, 5.0};
    PidState s;

    for (int k = 0; k < 500; ++k) {
        const double t = 0.01 * k;
        const double e = std::sin(2.0 * t) + 0.3 * std::cos(5.0 * t);
        auto [out, next] = pid_step(s, e, g, 0.01);
        s = next;

        const double prev = ref.first ? e : ref.prev;
        ref.integ = std::clamp(ref.integ + 0.005 * (e + prev), -5.0, 5.0);
        const double raw = ref.first ? 0.0 : (e - prev) / 0.01;
        ref.dfilt += (0.01 / (0.08 + 0.01)) * (raw - ref.dfilt);
        ref.prev = e;
        ref.first = false;
        const double expect = 1.2 * e + 0.7 * ref.integ + 0.3 * ref.dfilt;
        CHECK(out == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("horizontal_control: zero error commands level attitude") {
    CascadeController c(default_gains(), kMass, kG);
    const auto [roll, pitch] = c.horizontal_control(Setpoint{}, {0.0, 0.0}, {0.0, 0.0}, 0.0, 0.01);
    CHECK(roll == 0.0);
    CHECK(pitch == 0.0);
}

TEST_CASE("horizontal_control: positive x error pitches forward") {
    ControllerGains g = default_gains();
    g.attitude_rate_limit = 1e6;  // isolate the sign logic
    CascadeController c(g, kMass, kG);
    Setpoint sp;
    sp.xd = 0.5;
    const auto [roll, pitch] = c.horizontal_control(sp, {0.0, 0.0}, {0.0, 0.0}, 0.0, 0.01);
    CHECK(pitch > 0.0);
    CHECK(roll == doctest::Approx(0.0));
}

TEST_CASE("horizontal_control: at 90 deg yaw the command moves to the roll channel") {
    ControllerGains g = default_gains();
    g.attitude_rate_limit = 1e6;
    CascadeController c(g, kMass, kG);
    Setpoint sp;
    sp.xd = 0.5;
    const double yaw = M_PI / 2.0;
    const auto [roll, pitch] = c.horizontal_control(sp, {0.0, 0.0}, {0.0, 0.0}, yaw, 0.01);

    // Rotation oracle: error (e,0) through R(-yaw) lands on body -y, and
    // u2 = -PID(v_ey) makes the roll command positive.
    const Eigen::Rotation2Dd rot(-yaw);
    const Eigen::Vector2d body_err = rot * Eigen::Vector2d(1.5 * 0.5, 0.0);
    CHECK(body_err.x() == doctest::Approx(0.0));
    CHECK(body_err.y() < 0.0);
    CHECK(roll > 0.0);
    CHECK(pitch == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("horizontal_control: yaw-rotation consistency") {
    // Running at yaw on world-frame errors equals running at yaw 0 on
    // pre-rotated errors, argument-wise.
    const double yaw = 0.73;
    Setpoint sp;
    sp.xd = 0.3;
    sp.yd = -0.2;
    const Eigen::Vector2d pos(0.05, 0.1), vel(0.2, -0.1);

    ControllerGains g = default_gains();
    g.attitude_rate_limit = 1e6;
    CascadeController a(g, kMass, kG), b(g, kMass, kG);

    const auto [ra, pa] = a.horizontal_control(sp, pos, vel, yaw, 0.01);

    const Eigen::Rotation2Dd rot(-yaw);
    const Eigen::Vector2d sp_r = rot * Eigen::Vector2d(sp.xd, sp.yd);
    const Eigen::Vector2d pos_r = rot * pos;
    const Eigen::Vector2d vel_r = rot * vel;
    Setpoint sp2;
    sp2.xd = sp_r.x();
    sp2.yd = sp_r.y();
    const auto [rb, pb] = b.horizontal_control(sp2, pos_r, vel_r, 0.0, 0.01);

    CHECK(ra == doctest::Approx(rb).epsilon(1e-12));
    CHECK(pa == doctest::Approx(pb).epsilon(1e-12));
}

TEST_CASE("horizontal_control: saturation and slew limits hold always") {
    ControllerGains g = default_gains();
    g.attitude_saturation = 0.3;
    g.attitude_rate_limit = 2.0;
    CascadeController c(g, kMass, kG);
    Setpoint sp;
    sp.xd = 50.0;
    sp.yd = -50.0;
    double prev_roll = 0.0, prev_pitch = 0.0;
    bool first = true;
    for (int k = 0; k < 100; ++k) {
        const auto [roll, pitch] = c.horizontal_control(sp, {0.0, 0.0}, {0.0, 0.0}, 0.4, 0.01);
        CHECK(std::abs(roll) <= 0.3 + 1e-12);
        CHECK(std::abs(pitch) <= 0.3 + 1e-12);
        if (!first) {
            CHECK(std::abs(roll - prev_roll) <= 2.0 * 0.01 + 1e-12);
            CHECK(std::abs(pitch - prev_pitch) <= 2.0 * 0.01 + 1e-12);
        }
        prev_roll = roll;
        prev_pitch = pitch;
        first = false;
    }
    CHECK(c.saturation_events() > 0);
}

TEST_CASE("horizontal_control: non-finite estimate latches the fault flag") {
    CascadeController c(default_gains(), kMass, kG);
    const auto [roll, pitch] = c.horizontal_control(
        Setpoint{}, {std::numeric_limits<double>::quiet_NaN(), 0.0}, {0.0, 0.0}, 0.0, 0.01);
    CHECK(roll == 0.0);
    CHECK(pitch == 0.0);
    CHECK(c.faulted());
}

TEST_CASE("vertical_control: hover feedforward at the setpoint") {
    CascadeController c(default_gains(), kMass, kG);
    const ThrustCurve tc = curve();
    Setpoint sp;
    sp.zd = 0.35;
    const double duty = c.vertical_control(sp, 0.35, 0.0, tc, 0.01);
    CHECK(duty == doctest::Approx(tc.thrust_to_pwm(kMass * kG)).epsilon(1e-9));
    CHECK(tc.pwm_to_thrust(duty) == doctest::Approx(kMass * kG).epsilon(1e-6));
}

TEST_CASE("vertical_control: large error clamps the duty at 1") {
    CascadeController c(default_gains(), kMass, kG);
    const ThrustCurve tc = curve();
    Setpoint sp;
    sp.zd = 100.0;
    const double duty = c.vertical_control(sp, 0.0, 0.0, tc, 0.01);
    CHECK(duty == doctest::Approx(1.0));
    CHECK(c.saturation_events() > 0);
}

TEST_CASE("attitude_loop: commands moments toward the target, clamped") {
    ControllerGains g = default_gains();
    g.att_kP = 250.0;
    g.att_kD = 30.0;
    g.moment_limit = 100.0;
    CascadeController c(g, kMass, kG);
    AttitudeState att;
    att.phi = 0.1;
    att.phi_dot = 0.5;
    const Vec3 u = c.attitude_loop(0.0, 0.0, att);
    CHECK(u.x() == doctest::Approx(250.0 * (0.0 - 0.1) - 30.0 * 0.5).epsilon(1e-12));
    CHECK(u.y() == 0.0);
    att.phi = -3.0;  // demands more than the clamp
    const Vec3 u2 = c.attitude_loop(0.0, 0.0, att);
    CHECK(u2.x() == doctest::Approx(100.0));
}

TEST_CASE("gains validation rejects nonsense") {
    ControllerGains g = default_gains();
    g.attitude_saturation = 2.0;  // >= pi/2
    CHECK_THROWS_AS(CascadeController(g, kMass, kG), ConfigError);
    ControllerGains g2 = default_gains();
    g2.attitude_rate_limit = 0.0;
    CHECK_THROWS_AS(CascadeController(g2, kMass, kG), ConfigError);
}
