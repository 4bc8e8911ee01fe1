#pragma once

// Translational state estimation driven by position measurements only.
//
// Two filters share one discrete translational model (position rate =
// velocity, velocity rate = thrust projection minus gravity, evaluated at the
// estimated attitude):
//
//   * EKF-UI: 9-state observer (px, vx, py, vy, pz, vz, d1, d2, d3) where the
//     d_i are unknown platform-induced accelerations, modeled as a random
//     walk (d_dot = 0 plus process noise) and injected into the velocity rows
//     through a selection matrix with -1 entries.
//   * Baseline EKF: the same recursion restricted to the six translational
//     states, no unknown-input augmentation.
//
// The process Jacobian is taken by forward finite differences of the discrete
// prediction map. A separate standard EKF estimates the angular states; its
// dynamics are unaffected by the platform's translational motion.

#include "noninertial/actuation.hpp"
#include "noninertial/dynamics.hpp"
#include "noninertial/types.hpp"

#include <functional>
#include <optional>

namespace noninertial {

/// 9-dimensional extended state, ordered (px, vx, py, vy, pz, vz, d1, d2, d3).
/// Positions/velocities are relative to the platform frame; d is the unknown
/// platform acceleration expressed in that frame.
struct ExtendedState {
    double px{0.0}, vx{0.0};
    double py{0.0}, vy{0.0};
    double pz{0.0}, vz{0.0};
    double d1{0.0}, d2{0.0}, d3{0.0};

    Vec9 vector() const;
    static ExtendedState from_vector(const Vec9& v);
    Vec3 position() const { return {px, py, pz}; }
    Vec3 velocity() const { return {vx, vy, vz}; }
    Vec3 disturbance() const { return {d1, d2, d3}; }
};

struct FilterConfig {
    Mat6 Q_core = Mat6::Zero();  // process noise, core 6 states (per step)
    Mat3 Q_d = Mat3::Zero();     // process noise, unknown inputs (per step)
    Mat3 R = Mat3::Identity() * 1e-6;
    Mat9 P0 = Mat9::Identity();
    double Ts{0.01};
    double epsilon_fd{1e-6};
    double gravity{9.81};
    bool joseph_update{false};

    Mat9 Q_aug() const;
    void validate() const;
};

struct FilterState {
    ExtendedState estimate;
    Mat9 covariance = Mat9::Identity();
    double last_update_time{0.0};
    int resymmetrize_events{0};  // times ||P - P^T||_inf exceeded tolerance
};

/// Baseline EKF state over (px, vx, py, vy, pz, vz).
struct BaselineState {
    Vec6 state = Vec6::Zero();
    Mat6 covariance = Mat6::Identity();
    double last_update_time{0.0};
    int resymmetrize_events{0};
};

/// Attitude estimate (phi, phi_dot, theta, theta_dot, psi, psi_dot).
struct AttitudeState {
    double phi{0.0}, phi_dot{0.0};
    double theta{0.0}, theta_dot{0.0};
    double psi{0.0}, psi_dot{0.0};
    Mat6 covariance = Mat6::Identity();

    Vec6 vector() const;
    static AttitudeState from_vector(const Vec6& v, const Mat6& cov);
    Vec3 angles() const { return {phi, theta, psi}; }
};

struct AttitudeFilterConfig {
    Mat6 Q = Mat6::Identity() * 1e-9;
    Mat3 R = Mat3::Identity() * 4e-6;
    Mat6 P0 = Mat6::Identity();
    double Ts{0.01};
    double epsilon_fd{1e-6};
};

/// Innovation bookkeeping for consistency metrics.
struct InnovationRecord {
    double time{0.0};
    Vec3 innovation = Vec3::Zero();
    Mat3 S = Mat3::Zero();
    double nis{0.0};  // innovation' S^-1 innovation
};

/// Forward-difference Jacobian of f about z_hat: column i is
/// (f(z + eps e_i) - f(z)) / eps. Throws FilterError on non-finite output.
Mat9 fd_jacobian(const std::function<Vec9(const Vec9&)>& f, const ExtendedState& z_hat, double epsilon);

/// Discrete prediction map of the extended system over one step Ts: exact
/// constant-acceleration kinematics for the thrust/gravity part plus the
/// Ts * E * d unknown-input term on the velocity rows; d rows are identity.
Vec9 ekfui_predict_map(const Vec9& z, double u1, double phi, double theta, double psi,
                       double Ts, double gravity);

/// Same map restricted to the six translational states (no unknown inputs).
Vec6 baseline_predict_map(const Vec6& z, double u1, double phi, double theta, double psi,
                          double Ts, double gravity);

FilterState ekfui_predict(const FilterState& fs, const ControlInput& u, const AttitudeState& attitude,
                          const FilterConfig& cfg);

struct UpdateResult {
    FilterState state;
    InnovationRecord innovation;
};
UpdateResult ekfui_update(const FilterState& fs, const Vec3& y, const FilterConfig& cfg, double time);

struct StepResult {
    FilterState state;
    std::optional<InnovationRecord> innovation;
};
/// Predict always; update only when a synchronized measurement is present.
StepResult ekfui_step(const FilterState& fs, const ControlInput& u, const AttitudeState& attitude,
                      const std::optional<Vec3>& y, const FilterConfig& cfg, double time);

struct BaselineStepResult {
    BaselineState state;
    std::optional<InnovationRecord> innovation;
};
BaselineStepResult ekf_baseline_step(const BaselineState& fs, const ControlInput& u,
                                     const AttitudeState& attitude, const std::optional<Vec3>& y,
                                     const FilterConfig& cfg, double time);

/// Standard EKF over the angular states. Measurement is a direct (phi, theta,
/// psi) reading; innovations are angle-wrapped.
AttitudeState attitude_ekf_step(const AttitudeState& as, const ControlInput& u,
                                const std::optional<Vec3>& angles_meas, const AttitudeFilterConfig& cfg,
                                const InertiaParams& params);

/// Initialization: positions from the first measurement, velocities and d zero.
FilterState init_filter(const Vec3& first_position, const FilterConfig& cfg);
BaselineState init_baseline(const Vec3& first_position, const FilterConfig& cfg);
AttitudeState init_attitude(const Vec3& first_angles, const AttitudeFilterConfig& cfg);

}  // namespace noninertial
