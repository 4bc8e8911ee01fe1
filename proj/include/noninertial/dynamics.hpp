#pragma once

// Quadrotor rigid-body dynamics, in the inertial frame and in a translating
// (non-inertial) platform frame.
//
// Euler convention is Z-Y-X (yaw-pitch-roll) throughout: the body-to-world
// rotation is Rz(psi) * Ry(theta) * Rx(phi). The gyroscopic terms use the
// rate-product form (phi_dot * psi_dot etc.).

#include "noninertial/types.hpp"

#include <functional>

namespace noninertial {

struct ControlInput;  // actuation.hpp

/// 12-dimensional rigid-body state. Positions/velocities are relative to the
/// platform frame when used with the non-inertial dynamics, world-frame
/// otherwise. Vector layout (odd slots = positions/angles, even = rates):
///   (x, vx, y, vy, z, vz, phi, phi_dot, theta, theta_dot, psi, psi_dot)
struct FullState {
    double x{0.0}, vx{0.0};
    double y{0.0}, vy{0.0};
    double z{0.0}, vz{0.0};
    double phi{0.0}, phi_dot{0.0};
    double theta{0.0}, theta_dot{0.0};
    double psi{0.0}, psi_dot{0.0};

    Vec12 vector() const;
    static FullState from_vector(const Vec12& v);

    Vec3 position() const { return {x, y, z}; }
    Vec3 velocity() const { return {vx, vy, vz}; }
    Vec3 angles() const { return {phi, theta, psi}; }
    Vec3 angle_rates() const { return {phi_dot, theta_dot, psi_dot}; }

    bool finite() const;
    /// Wraps phi, theta, psi into (-pi, pi].
    void normalize_angles();
};

/// Physical parameters of the vehicle. thrust_coeff and yaw_coeff are the
/// b and l of the mixing matrix (b appears in the roll/pitch rows, l in the
/// yaw row; field names follow that layout without asserting intent).
struct InertiaParams {
    double mass{0.033};           // kg
    double Ix{2.3951e-5};         // kg m^2
    double Iy{2.3951e-5};         // kg m^2
    double Iz{3.2347e-5};         // kg m^2
    double g{9.81};               // m/s^2
    double arm_length{0.046};     // m
    double thrust_coeff{2.0e-8};  // N/(rad/s)^2
    double yaw_coeff{5.0e-10};    // N m/(rad/s)^2

    /// Throws ConfigError unless mass, Ix, Iy, Iz, g are all > 0.
    void validate() const;
};

/// Inertial-frame linear acceleration of the platform.
struct PlatformAcceleration {
    double ax{0.0}, ay{0.0}, az{0.0};

    Vec3 vec() const { return {ax, ay, az}; }
    static PlatformAcceleration from_vec(const Vec3& a) { return {a.x(), a.y(), a.z()}; }
    bool finite() const { return std::isfinite(ax) && std::isfinite(ay) && std::isfinite(az); }
};

/// Gyroscopic coupling matrix diag((Iy-Iz)/Ix, (Iz-Ix)/Iy, (Ix-Iy)/Iz).
Mat3 coupling_matrix(const InertiaParams& params);

/// World-frame acceleration produced by mass-normalized collective thrust u1
/// at the given attitude, gravity included: u1 * R(phi,theta,psi) e3 - g e3.
Vec3 thrust_gravity_accel(double u1, double phi, double theta, double psi, double g);

/// Time derivative of the 12-state in the inertial frame.
/// Throws std::invalid_argument on non-finite input, requires u1 >= 0.
Vec12 inertial_derivative(const FullState& state, const ControlInput& u, const InertiaParams& params);
Vec12 inertial_derivative(const Vec12& state, const ControlInput& u, const InertiaParams& params);

/// abs_accel minus the platform acceleration, componentwise.
Vec3 relative_acceleration(const Vec3& abs_accel, const PlatformAcceleration& platform);

/// Inertial derivative with (-ax,-ay,-az) added at the velocity-rate slots
/// (vector indices 1, 3, 5); angular dynamics unchanged.
Vec12 noninertial_derivative(const FullState& state, const ControlInput& u,
                             const PlatformAcceleration& platform, const InertiaParams& params);
Vec12 noninertial_derivative(const Vec12& state, const ControlInput& u,
                             const PlatformAcceleration& platform, const InertiaParams& params);

using DerivativeFn = std::function<Vec12(const Vec12&)>;

/// One fixed-step classical RK4 advance. Requires 0 < dt <= 0.05. Angles are
/// wrapped into (-pi, pi] afterwards. Throws IntegrationError when the result
/// is non-finite, std::invalid_argument on a bad dt.
FullState integrate_step(const FullState& state, const DerivativeFn& derivative, double dt);

}  // namespace noninertial
