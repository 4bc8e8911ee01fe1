#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "noninertial/actuation.hpp"
#include "noninertial/dynamics.hpp"

#include <random>

using namespace noninertial;

namespace {

InertiaParams crazyflie_params() {
    InertiaParams p;
    p.mass = 0.033;
    p.Ix = 2.3951e-5;
    p.Iy = 2.3951e-5;
    p.Iz = 3.2347e-5;
    p.g = 9.81;
    return p;
}

FullState random_state(std::mt19937& gen) {
    std::uniform_real_distribution<double> pos(-1.0, 1.0);
    std::uniform_real_distribution<double> ang(-0.5, 0.5);
    FullState s;
    s.x = pos(gen);
    s.vx = pos(gen);
    s.y = pos(gen);
    s.vy = pos(gen);
    s.z = pos(gen);
    s.vz = pos(gen);
    s.phi = ang(gen);
    s.phi_dot = ang(gen);
    s.theta = ang(gen);
    s.theta_dot = ang(gen);
    s.psi = ang(gen);
    s.psi_dot = ang(gen);
    return s;
}

}  // namespace

TEST_CASE("coupling_matrix: symmetric body vanishes") {
    InertiaParams p = crazyflie_params();
    p.Ix = p.Iy = p.Iz = 1e-5;
    CHECK(coupling_matrix(p).norm() == 0.0);
}

TEST_CASE("coupling_matrix: direct substitution") {
    InertiaParams p = crazyflie_params();
    p.Ix = 1.0;
    p.Iy = 2.0;
    p.Iz = 3.0;
    const Mat3 m = coupling_matrix(p);
    CHECK(m(0, 0) == doctest::Approx(-1.0));
    CHECK(m(1, 1) == doctest::Approx(1.0));
    CHECK(m(2, 2) == doctest::Approx(-1.0 / 3.0));
}

TEST_CASE("coupling_matrix: crazyflie-class values (hand arithmetic)") {
    const Mat3 m = coupling_matrix(crazyflie_params());
    // (2.3951e-5 - 3.2347e-5) / 2.3951e-5 worked out by hand
    CHECK(m(0, 0) == doctest::Approx(-0.3505490376).epsilon(1e-9));
    CHECK(m(1, 1) == doctest::Approx(0.3505490376).epsilon(1e-9));
    CHECK(m(2, 2) == doctest::Approx(0.0));
}

TEST_CASE("inertial_derivative: hover equilibrium") {
    const InertiaParams p = crazyflie_params();
    FullState s;
    const ControlInput u{p.g, 0.0, 0.0, 0.0};
    CHECK(inertial_derivative(s, u, p).norm() == 0.0);
}

TEST_CASE("inertial_derivative: yaw does not tilt the thrust vector") {
    const InertiaParams p = crazyflie_params();
    FullState s;
    s.psi = 1.234;
    const ControlInput u{p.g, 0.0, 0.0, 0.0};
    const Vec12 d = inertial_derivative(s, u, p);
    CHECK(d(1) == doctest::Approx(0.0));
    CHECK(d(3) == doctest::Approx(0.0));
    CHECK(d(5) == doctest::Approx(0.0));
}

TEST_CASE("inertial_derivative: rotation-column oracle") {
    const InertiaParams p = crazyflie_params();
    FullState s;
    s.phi = 0.1;
    s.theta = 0.2;
    s.psi = 0.3;
    const double u1 = 10.0;
    const ControlInput u{u1, 0.0, 0.0, 0.0};
    const Vec12 d = inertial_derivative(s, u, p);

    // Independent route: third column of Rz(psi) Ry(theta) Rx(phi).
    const Eigen::Matrix3d R = (Eigen::AngleAxisd(s.psi, Vec3::UnitZ()) *
                               Eigen::AngleAxisd(s.theta, Vec3::UnitY()) *
                               Eigen::AngleAxisd(s.phi, Vec3::UnitX()))
                                  .toRotationMatrix();
    const Vec3 expected = u1 * R.col(2) - Vec3(0.0, 0.0, p.g);
    CHECK(d(1) == doctest::Approx(expected.x()).epsilon(1e-12));
    CHECK(d(3) == doctest::Approx(expected.y()).epsilon(1e-12));
    CHECK(d(5) == doctest::Approx(expected.z()).epsilon(1e-12));
}

TEST_CASE("inertial_derivative: rejects non-finite input") {
    const InertiaParams p = crazyflie_params();
    FullState s;
    s.vx = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(inertial_derivative(s, ControlInput{p.g, 0, 0, 0}, p), std::invalid_argument);
    CHECK_THROWS_AS(inertial_derivative(FullState{}, ControlInput{-1.0, 0, 0, 0}, p),
                    std::invalid_argument);
}

TEST_CASE("relative_acceleration componentwise") {
    CHECK(relative_acceleration(Vec3(0, 0, 0), {0, 0, 0}).norm() == 0.0);
    CHECK(relative_acceleration(Vec3(1, 2, 3), {1, 2, 3}).norm() == 0.0);
    const Vec3 r = relative_acceleration(Vec3(0.5, 0.0, 9.81), {0.2, -0.1, 0.0});
    CHECK(r.x() == doctest::Approx(0.3));
    CHECK(r.y() == doctest::Approx(0.1));
    CHECK(r.z() == doctest::Approx(9.81));
}

TEST_CASE("noninertial_derivative: inertial limit and single-slot disturbance") {
    const InertiaParams p = crazyflie_params();
    std::mt19937 gen(7);
    for (int i = 0; i < 20; ++i) {
        const FullState s = random_state(gen);
        const ControlInput u{5.0, 0.1, -0.2, 0.05};
        const Vec12 a = noninertial_derivative(s, u, PlatformAcceleration{0, 0, 0}, p);
        const Vec12 b = inertial_derivative(s, u, p);
        CHECK((a - b).norm() == 0.0);
    }

    FullState hover;
    const ControlInput u{p.g, 0.0, 0.0, 0.0};
    const Vec12 d = noninertial_derivative(hover, u, PlatformAcceleration{0.3, 0.0, 0.0}, p);
    CHECK(d(1) == doctest::Approx(-0.3));
    Vec12 rest = d;
    rest(1) = 0.0;
    CHECK(rest.norm() == 0.0);
}

TEST_CASE("noninertial_derivative: explicit E-matrix oracle") {
    const InertiaParams p = crazyflie_params();
    std::mt19937 gen(11);
    Eigen::Matrix<double, 12, 3> E = Eigen::Matrix<double, 12, 3>::Zero();
    E(1, 0) = -1.0;
    E(3, 1) = -1.0;
    E(5, 2) = -1.0;
    const PlatformAcceleration a{0.1, 0.2, 0.3};
    for (int i = 0; i < 20; ++i) {
        const FullState s = random_state(gen);
        const ControlInput u{3.0, 0.2, 0.1, -0.1};
        const Vec12 lhs = noninertial_derivative(s, u, a, p) - inertial_derivative(s, u, p);
        const Vec12 rhs = E * a.vec();
        CHECK((lhs - rhs).norm() < 1e-14);
    }
}

TEST_CASE("integrate_step: zero and constant derivatives") {
    FullState s;
    s.x = 0.4;
    s.psi = 0.2;
    const auto zero = [](const Vec12&) { return Vec12::Zero().eval(); };
    const FullState same = integrate_step(s, zero, 0.01);
    CHECK((same.vector() - s.vector()).norm() == 0.0);

    Vec12 c;
    c << 1, -2, 3, -4, 5, -6, 0.1, 0.2, -0.1, -0.2, 0.05, 0.3;
    const auto constant = [&](const Vec12&) { return c; };
    const FullState moved = integrate_step(s, constant, 0.02);
    CHECK((moved.vector() - (s.vector() + 0.02 * c)).norm() < 1e-12);
}

TEST_CASE("integrate_step: projectile closed form") {
    // z_dot = v, v_dot = -g over 1 s.
    const double g = 9.81, z0 = 1.0, v0 = 0.5;
    FullState s;
    s.z = z0;
    s.vz = v0;
    const auto fall = [&](const Vec12& x) {
        Vec12 d = Vec12::Zero();
        d(4) = x(5);
        d(5) = -g;
        return d;
    };
    FullState cur = s;
    for (int i = 0; i < 1000; ++i) cur = integrate_step(cur, fall, 0.001);
    CHECK(cur.z == doctest::Approx(z0 + v0 - 0.5 * g).epsilon(1e-9));
    CHECK(cur.vz == doctest::Approx(v0 - g).epsilon(1e-9));
}

TEST_CASE("integrate_step: dt bounds and divergence error") {
    FullState s;
    const auto zero = [](const Vec12&) { return Vec12::Zero().eval(); };
    CHECK_THROWS_AS(integrate_step(s, zero, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(integrate_step(s, zero, 0.06), std::invalid_argument);
    const auto blowup = [](const Vec12&) { return Vec12::Constant(1e308).eval(); };
    CHECK_THROWS_AS(integrate_step(s, blowup, 0.01), IntegrationError);
}

TEST_CASE("hover fixed point over many steps") {
    const InertiaParams p = crazyflie_params();
    const ControlInput u{p.g, 0.0, 0.0, 0.0};
    FullState s;
    const auto f = [&](const Vec12& x) { return inertial_derivative(x, u, p); };
    for (int i = 0; i < 100; ++i) {
        const FullState next = integrate_step(s, f, 0.002);
        CHECK((next.vector() - s.vector()).lpNorm<Eigen::Infinity>() < 1e-12);
        s = next;
    }
}

TEST_CASE("symmetric-body decoupling") {
    InertiaParams p = crazyflie_params();
    p.Ix = p.Iy = p.Iz = 2e-5;
    std::mt19937 gen(3);
    for (int i = 0; i < 20; ++i) {
        const FullState s = random_state(gen);
        const ControlInput u{2.0, 0.7, -0.4, 0.9};
        const Vec12 d = inertial_derivative(s, u, p);
        CHECK(d(7) == doctest::Approx(u.u2));
        CHECK(d(9) == doctest::Approx(u.u3));
        CHECK(d(11) == doctest::Approx(u.u4));
    }
}

TEST_CASE("determinism: identical inputs give bit-identical trajectories") {
    const InertiaParams p = crazyflie_params();
    const ControlInput u{p.g * 1.01, 0.3, -0.2, 0.1};
    const auto f = [&](const Vec12& x) { return inertial_derivative(x, u, p); };
    auto roll = [&]() {
        FullState s;
        s.phi = 0.02;
        for (int i = 0; i < 500; ++i) s = integrate_step(s, f, 0.002);
        return s.vector();
    };
    const Vec12 a = roll();
    const Vec12 b = roll();
    CHECK((a - b).norm() == 0.0);
}
