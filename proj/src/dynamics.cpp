#include "noninertial/dynamics.hpp"

#include "noninertial/actuation.hpp"

#include <atomic>
#include <iostream>
#include <sstream>

namespace noninertial {

Vec12 FullState::vector() const {
    Vec12 v;
    v << x, vx, y, vy, z, vz, phi, phi_dot, theta, theta_dot, psi, psi_dot;
    return v;
}

FullState FullState::from_vector(const Vec12& v) {
    FullState s;
    s.x = v(0);
    s.vx = v(1);
    s.y = v(2);
    s.vy = v(3);
    s.z = v(4);
    s.vz = v(5);
    s.phi = v(6);
    s.phi_dot = v(7);
    s.theta = v(8);
    s.theta_dot = v(9);
    s.psi = v(10);
    s.psi_dot = v(11);
    return s;
}

bool FullState::finite() const { return vector().allFinite(); }

void FullState::normalize_angles() {
    phi = wrap_angle(phi);
    theta = wrap_angle(theta);
    psi = wrap_angle(psi);
}

void InertiaParams::validate() const {
    if (!(mass > 0.0) || !(Ix > 0.0) || !(Iy > 0.0) || !(Iz > 0.0) || !(g > 0.0)) {
        std::ostringstream oss;
        oss << "InertiaParams: mass, Ix, Iy, Iz, g must all be positive (mass=" << mass << " Ix=" << Ix
            << " Iy=" << Iy << " Iz=" << Iz << " g=" << g << ")";
        throw ConfigError(oss.str());
    }
}

Mat3 coupling_matrix(const InertiaParams& params) {
    Mat3 m = Mat3::Zero();
    m(0, 0) = (params.Iy - params.Iz) / params.Ix;
    m(1, 1) = (params.Iz - params.Ix) / params.Iy;
    m(2, 2) = (params.Ix - params.Iy) / params.Iz;
    return m;
}

Vec3 thrust_gravity_accel(double u1, double phi, double theta, double psi, double g) {
    const double cphi = std::cos(phi), sphi = std::sin(phi);
    const double cth = std::cos(theta), sth = std::sin(theta);
    const double cpsi = std::cos(psi), spsi = std::sin(psi);
    return {u1 * (cphi * sth * cpsi + sphi * spsi),
            u1 * (cphi * sth * spsi - sphi * cpsi),
            u1 * cphi * cth - g};
}

Vec12 inertial_derivative(const Vec12& s, const ControlInput& u, const InertiaParams& params) {
    if (!s.allFinite() || !u.finite()) {
        throw std::invalid_argument("inertial_derivative: non-finite state or input");
    }
    if (u.u1 < 0.0) {
        throw std::invalid_argument("inertial_derivative: u1 must be >= 0");
    }

    const double phi = s(6), phi_dot = s(7);
    const double theta = s(8), theta_dot = s(9);
    const double psi = s(10), psi_dot = s(11);

    const Vec3 accel = thrust_gravity_accel(u.u1, phi, theta, psi, params.g);
    const Mat3 m = coupling_matrix(params);

    Vec12 d;
    d(0) = s(1);
    d(1) = accel.x();
    d(2) = s(3);
    d(3) = accel.y();
    d(4) = s(5);
    d(5) = accel.z();
    d(6) = phi_dot;
    d(7) = m(0, 0) * theta_dot * psi_dot + u.u2;
    d(8) = theta_dot;
    d(9) = m(1, 1) * phi_dot * psi_dot + u.u3;
    d(10) = psi_dot;
    d(11) = m(2, 2) * phi_dot * theta_dot + u.u4;
    return d;
}

Vec12 inertial_derivative(const FullState& state, const ControlInput& u, const InertiaParams& params) {
    return inertial_derivative(state.vector(), u, params);
}

Vec3 relative_acceleration(const Vec3& abs_accel, const PlatformAcceleration& platform) {
    return abs_accel - platform.vec();
}

Vec12 noninertial_derivative(const Vec12& state, const ControlInput& u,
                             const PlatformAcceleration& platform, const InertiaParams& params) {
    if (!platform.finite()) {
        throw std::invalid_argument("noninertial_derivative: non-finite platform acceleration");
    }
    Vec12 d = inertial_derivative(state, u, params);
    d(1) -= platform.ax;
    d(3) -= platform.ay;
    d(5) -= platform.az;
    return d;
}

Vec12 noninertial_derivative(const FullState& state, const ControlInput& u,
                             const PlatformAcceleration& platform, const InertiaParams& params) {
    return noninertial_derivative(state.vector(), u, platform, params);
}

namespace {
constexpr double kMaxStep = 0.05;
constexpr double kPitchWarnThreshold = 80.0 * 3.14159265358979323846 / 180.0;
}  // namespace

FullState integrate_step(const FullState& state, const DerivativeFn& derivative, double dt) {
    if (!(dt > 0.0) || dt > kMaxStep) {
        std::ostringstream oss;
        oss << "integrate_step: dt must be in (0, " << kMaxStep << "], got " << dt;
        throw std::invalid_argument(oss.str());
    }

    const Vec12 x = state.vector();
    const Vec12 k1 = derivative(x);
    const Vec12 k2 = derivative(x + 0.5 * dt * k1);
    const Vec12 k3 = derivative(x + 0.5 * dt * k2);
    const Vec12 k4 = derivative(x + dt * k3);
    const Vec12 next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    if (!next.allFinite()) {
        std::ostringstream oss;
        oss << "integrate_step: non-finite state after step dt=" << dt << " from ["
            << x.transpose() << "]";
        throw IntegrationError(oss.str());
    }

    FullState out = FullState::from_vector(next);
    out.normalize_angles();

    if (std::abs(out.theta) > kPitchWarnThreshold) {
        static std::atomic<bool> warned{false};
        if (!warned.exchange(true)) {
            std::cerr << "warning: pitch " << out.theta << " rad is near the Euler singularity\n";
        }
    }
    return out;
}

}  // namespace noninertial
