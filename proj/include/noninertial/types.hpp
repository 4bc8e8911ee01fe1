#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace noninertial {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

/// Malformed or inconsistent configuration / scenario / curve file.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A commanded value cannot be realized by the actuators.
class SaturationError : public std::runtime_error {
public:
    SaturationError(const std::string& msg, int rotor) : std::runtime_error(msg), rotor_index(rotor) {}
    int rotor_index;
};

/// Numerical integration produced a non-finite state.
class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A filter recursion produced a non-finite estimate or covariance.
class FilterError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Innovation covariance is singular or too ill-conditioned to invert.
class SingularInnovationError : public FilterError {
public:
    using FilterError::FilterError;
};

/// Time series handed to the metrics code do not line up.
class AlignmentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Wrap an angle into (-pi, pi]. In-range values pass through unchanged.
inline double wrap_angle(double a) {
    constexpr double pi = 3.14159265358979323846;
    if (a > -pi && a <= pi) return a;
    a = std::fmod(a + pi, 2.0 * pi);
    if (a <= 0.0) a += 2.0 * pi;
    return a - pi;
}

/// Difference b - a wrapped into (-pi, pi].
inline double angle_diff(double b, double a) { return wrap_angle(b - a); }

}  // namespace noninertial
