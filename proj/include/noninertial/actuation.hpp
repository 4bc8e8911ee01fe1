#pragma once

// Rotor-speed mixing and the empirical PWM <-> thrust curve.

#include "noninertial/dynamics.hpp"
#include "noninertial/types.hpp"

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace noninertial {

/// Abstract control inputs: mass-normalized collective thrust u1 (m/s^2) and
/// the three angular accelerations u2, u3, u4 (rad/s^2).
struct ControlInput {
    double u1{0.0};
    double u2{0.0};
    double u3{0.0};
    double u4{0.0};

    Vec4 vec() const { return {u1, u2, u3, u4}; }
    bool finite() const {
        return std::isfinite(u1) && std::isfinite(u2) && std::isfinite(u3) && std::isfinite(u4);
    }
};

struct RotorSpeeds {
    std::array<double, 4> omega{0.0, 0.0, 0.0, 0.0};  // rad/s, each >= 0
};

enum class CurveInterp { Linear, MonotoneCubic };

/// Empirical PWM-duty to thrust curve. Samples must start at (0, 0), have
/// strictly increasing duty and non-decreasing thrust. MonotoneCubic uses
/// shape-preserving (Fritsch-Carlson) tangents, so the interpolant never
/// overshoots between samples.
class ThrustCurve {
public:
    ThrustCurve(std::vector<std::pair<double, double>> samples, CurveInterp mode);

    double pwm_to_thrust(double duty) const;
    double thrust_to_pwm(double thrust) const;

    double max_thrust() const { return samples_.back().second; }
    double max_duty() const { return samples_.back().first; }
    CurveInterp mode() const { return mode_; }
    const std::vector<std::pair<double, double>>& samples() const { return samples_; }

private:
    std::vector<std::pair<double, double>> samples_;
    std::vector<double> tangents_;  // d thrust / d duty at each knot (cubic mode)
    CurveInterp mode_;
};

/// 4x4 map from squared rotor speeds to (u1, u2, u3, u4).
Mat4 mixing_matrix(const InertiaParams& params);

/// u = B * (omega_i^2).
ControlInput mix_forward(const RotorSpeeds& omegas, const InertiaParams& params);

/// Inverts the mixing matrix. Throws SaturationError (carrying the rotor
/// index) when a solved omega^2 comes out negative.
RotorSpeeds mix_inverse(const ControlInput& u, const InertiaParams& params);

/// Free-function forms of the curve lookups.
double pwm_to_thrust(double duty, const ThrustCurve& curve);
double thrust_to_pwm(double thrust, const ThrustCurve& curve);

}  // namespace noninertial
