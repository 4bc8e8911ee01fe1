#pragma once

// Cascaded PID position control. Horizontal: position error -> desired
// velocity (proportional) -> velocity PID -> roll/pitch angle commands,
// rotated by -yaw into the body frame, saturated and slew-limited.
// Vertical: altitude error -> desired climb rate -> velocity PID -> thrust
// (hover feedforward mass*g added) -> PWM duty through the thrust curve.
//
// The vertical PID output is a desired vertical acceleration (m/s^2); thrust
// is mass * (g + output). A small PD attitude loop converts angle commands to
// the moment inputs u2..u4, standing in for the vehicle firmware.

#include "noninertial/actuation.hpp"
#include "noninertial/estimators.hpp"
#include "noninertial/types.hpp"

#include <utility>

namespace noninertial {

struct PidGains {
    double kP{0.0};
    double kI{0.0};
    double kD{0.0};
    double deriv_tau{0.05};      // first-order low-pass on the derivative, s
    double integ_limit{1e9};     // |integral accumulator| clamp
};

struct PidState {
    double integral{0.0};
    double prev_error{0.0};
    double deriv_filtered{0.0};
    bool initialized{false};
};

/// One discrete PID step: trapezoidal integral (clamped), derivative on the
/// error through the low-pass. Returns (output, advanced state).
std::pair<double, PidState> pid_step(const PidState& state, double error, const PidGains& gains, double dt);

struct ControllerGains {
    double kPxy{1.5};  // position -> velocity, horizontal (1/s)
    double kPz{1.5};   // vertical (1/s)
    PidGains vel_x;    // output: pitch command contribution (rad per m/s via gains)
    PidGains vel_y;
    PidGains vel_z;    // output: vertical acceleration (m/s^2)
    double attitude_rate_limit{2.0};  // rad/s slew on roll/pitch commands
    double attitude_saturation{0.35}; // rad
    double att_kP{250.0};             // inner PD loop, s^-2
    double att_kD{30.0};              // s^-1
    double yaw_damping{10.0};         // u4 = -yaw_damping * psi_dot (yaw tracking disabled)
    double moment_limit{100.0};       // |u2..u4| clamp, rad/s^2

    void validate() const;
};

struct Setpoint {
    double xd{0.0};
    double yd{0.0};
    double zd{0.0};
    double yaw_d{0.0};  // held constant; yaw control may be disabled
};

/// Holds the mutable loop state for one vehicle; single-owner.
class CascadeController {
public:
    CascadeController(ControllerGains gains, double mass, double gravity);

    /// Roll/pitch angle commands (u2_cmd, u3_cmd) from relative position and
    /// velocity estimates. `yaw` is the vehicle yaw in the frame pos/vel are
    /// expressed in. Non-finite inputs latch a fault and command hold-level.
    std::pair<double, double> horizontal_control(const Setpoint& sp, const Eigen::Vector2d& pos,
                                                 const Eigen::Vector2d& vel_est, double yaw, double dt);

    /// PWM duty for the altitude loop.
    double vertical_control(const Setpoint& sp, double z, double vz_est, const ThrustCurve& curve,
                            double dt);

    /// PD loop from angle commands to moments u2..u4 (yaw: rate damping only).
    Vec3 attitude_loop(double roll_cmd, double pitch_cmd, const AttitudeState& attitude) const;

    bool faulted() const { return faulted_; }
    int saturation_events() const { return saturation_events_; }
    void reset();

    const ControllerGains& gains() const { return gains_; }

private:
    ControllerGains gains_;
    double mass_;
    double gravity_;
    PidState pid_x_, pid_y_, pid_z_;
    double last_roll_cmd_{0.0};
    double last_pitch_cmd_{0.0};
    bool have_last_cmd_{false};
    bool faulted_{false};
    int saturation_events_{0};
};

}  // namespace noninertial
