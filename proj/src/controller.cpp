#include "noninertial/controller.hpp"

#include <algorithm>
#include <cmath>

namespace noninertial {

std::pair<double, PidState> pid_step(const PidState& state, double error, const PidGains& gains, double dt) {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("pid_step: dt must be > 0");
    }
    PidState next = state;
    const double prev = state.initialized ? state.prev_error : error;

    next.integral = state.integral + 0.5 * (error + prev) * dt;
    next.integral = std::clamp(next.integral, -gains.integ_limit, gains.integ_limit);

    const double raw_deriv = state.initialized ? (error - prev) / dt : 0.0;
    const double alpha = dt / (gains.deriv_tau + dt);
    next.deriv_filtered = state.deriv_filtered + alpha * (raw_deriv - state.deriv_filtered);

    next.prev_error = error;
    next.initialized = true;

    const double out = gains.kP * error + gains.kI * next.integral + gains.kD * next.deriv_filtered;
    return {out, next};
}

void ControllerGains::validate() const {
    constexpr double half_pi = 1.5707963267948966;
    if (!(attitude_rate_limit > 0.0)) {
        throw ConfigError("ControllerGains: attitude_rate_limit must be > 0");
    }
    if (!(attitude_saturation > 0.0) || attitude_saturation >= half_pi) {
        throw ConfigError("ControllerGains: attitude_saturation must be in (0, pi/2)");
    }
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(kPxy) || !finite(kPz) || !finite(att_kP) || !finite(att_kD) || !finite(yaw_damping) ||
        !finite(moment_limit)) {
        throw ConfigError("ControllerGains: gains must be finite");
    }
}

CascadeController::CascadeController(ControllerGains gains, double mass, double gravity)
    : gains_(std::move(gains)), mass_(mass), gravity_(gravity) {
    gains_.validate();
    if (!(mass_ > 0.0) || !(gravity_ > 0.0)) {
        throw ConfigError("CascadeController: mass and gravity must be > 0");
    }
}

void CascadeController::reset() {
    pid_x_ = PidState{};
    pid_y_ = PidState{};
    pid_z_ = PidState{};
    last_roll_cmd_ = last_pitch_cmd_ = 0.0;
    have_last_cmd_ = false;
    faulted_ = false;
    saturation_events_ = 0;
}

std::pair<double, double> CascadeController::horizontal_control(const Setpoint& sp,
                                                                const Eigen::Vector2d& pos,
                                                                const Eigen::Vector2d& vel_est, double yaw,
                                                                double dt) {
    if (!pos.allFinite() || !vel_est.allFinite() || !std::isfinite(yaw)) {
        faulted_ = true;
        return {0.0, 0.0};
    }

    const Eigen::Vector2d vel_des = gains_.kPxy * (Eigen::Vector2d(sp.xd, sp.yd) - pos);
    const Eigen::Vector2d vel_err = vel_des - vel_est;

    // Rotate the error pair by -yaw so the PID outputs act in the body frame.
    const double c = std::cos(-yaw), s = std::sin(-yaw);
    const double v_ex = c * vel_err.x() - s * vel_err.y();
    const double v_ey = s * vel_err.x() + c * vel_err.y();

    auto [out_x, st_x] = pid_step(pid_x_, v_ex, gains_.vel_x, dt);
    auto [out_y, st_y] = pid_step(pid_y_, v_ey, gains_.vel_y, dt);
    pid_x_ = st_x;
    pid_y_ = st_y;

    // u2 ~ -PID(v_ey) (roll), u3 ~ +PID(v_ex) (pitch).
    double roll_cmd = -out_y;
    double pitch_cmd = out_x;

    const double sat = gains_.attitude_saturation;
    if (std::abs(roll_cmd) > sat || std::abs(pitch_cmd) > sat) ++saturation_events_;
    roll_cmd = std::clamp(roll_cmd, -sat, sat);
    pitch_cmd = std::clamp(pitch_cmd, -sat, sat);

    if (have_last_cmd_) {
        const double max_delta = gains_.attitude_rate_limit * dt;
        if (std::abs(roll_cmd - last_roll_cmd_) > max_delta ||
            std::abs(pitch_cmd - last_pitch_cmd_) > max_delta) {
            ++saturation_events_;
        }
        roll_cmd = std::clamp(roll_cmd, last_roll_cmd_ - max_delta, last_roll_cmd_ + max_delta);
        pitch_cmd = std::clamp(pitch_cmd, last_pitch_cmd_ - max_delta, last_pitch_cmd_ + max_delta);
    }
    last_roll_cmd_ = roll_cmd;
    last_pitch_cmd_ = pitch_cmd;
    have_last_cmd_ = true;

    return {roll_cmd, pitch_cmd};
}

double CascadeController::vertical_control(const Setpoint& sp, double z, double vz_est,
                                           const ThrustCurve& curve, double dt) {
    if (!std::isfinite(z) || !std::isfinite(vz_est)) {
        faulted_ = true;
        // Hold-level fallback: hover feedforward only.
        return curve.thrust_to_pwm(std::min(mass_ * gravity_, curve.max_thrust()));
    }

    const double vz_des = gains_.kPz * (sp.zd - z);
    auto [accel_des, st_z] = pid_step(pid_z_, vz_des - vz_est, gains_.vel_z, dt);
    pid_z_ = st_z;

    double thrust = mass_ * (gravity_ + accel_des);
    if (thrust < 0.0) {
        ++saturation_events_;
        thrust = 0.0;
    }
    if (thrust > curve.max_thrust()) {
        ++saturation_events_;
    }
    return curve.thrust_to_pwm(std::min(thrust, curve.max_thrust()));
}

Vec3 CascadeController::attitude_loop(double roll_cmd, double pitch_cmd, const AttitudeState& attitude) const {
    Vec3 u;
    u(0) = gains_.att_kP * (roll_cmd - attitude.phi) - gains_.att_kD * attitude.phi_dot;
    u(1) = gains_.att_kP * (pitch_cmd - attitude.theta) - gains_.att_kD * attitude.theta_dot;
    u(2) = -gains_.yaw_damping * attitude.psi_dot;
    for (int i = 0; i < 3; ++i) {
        u(i) = std::clamp(u(i), -gains_.moment_limit, gains_.moment_limit);
    }
    return u;
}

}  // namespace noninertial
