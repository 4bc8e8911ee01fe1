#include "noninertial/actuation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace noninertial {

namespace {

// Shape-preserving knot tangents (Fritsch-Carlson). Guarantees the Hermite
// interpolant is monotone wherever the data are.
std::vector<double> monotone_tangents(const std::vector<std::pair<double, double>>& pts) {
    const std::size_t n = pts.size();
    std::vector<double> h(n - 1), delta(n - 1), m(n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = pts[i + 1].first - pts[i].first;
        delta[i] = (pts[i + 1].second - pts[i].second) / h[i];
    }
    if (n == 2) {
        m[0] = m[1] = delta[0];
        return m;
    }
    m[0] = ((2.0 * h[0] + h[1]) * delta[0] - h[0] * delta[1]) / (h[0] + h[1]);
    if (m[0] * delta[0] <= 0.0) {
        m[0] = 0.0;
    } else if (delta[0] * delta[1] <= 0.0 && std::abs(m[0]) > 3.0 * std::abs(delta[0])) {
        m[0] = 3.0 * delta[0];
    }
    const std::size_t last = n - 1;
    m[last] = ((2.0 * h[last - 1] + h[last - 2]) * delta[last - 1] - h[last - 1] * delta[last - 2]) /
              (h[last - 1] + h[last - 2]);
    if (m[last] * delta[last - 1] <= 0.0) {
        m[last] = 0.0;
    } else if (delta[last - 1] * delta[last - 2] <= 0.0 &&
               std::abs(m[last]) > 3.0 * std::abs(delta[last - 1])) {
        m[last] = 3.0 * delta[last - 1];
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0.0) {
            m[i] = 0.0;
        } else {
            const double w1 = 2.0 * h[i] + h[i - 1];
            const double w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    return m;
}

double hermite(double x, double x0, double x1, double y0, double y1, double m0, double m1) {
    const double h = x1 - x0;
    const double t = (x - x0) / h;
    const double t2 = t * t, t3 = t2 * t;
    return y0 * (2.0 * t3 - 3.0 * t2 + 1.0) + h * m0 * (t3 - 2.0 * t2 + t) +
           y1 * (-2.0 * t3 + 3.0 * t2) + h * m1 * (t3 - t2);
}

}  // namespace

ThrustCurve::ThrustCurve(std::vector<std::pair<double, double>> samples, CurveInterp mode)
    : samples_(std::move(samples)), mode_(mode) {
    if (samples_.size() < 2) {
        throw ConfigError("ThrustCurve: need at least two (pwm, thrust) samples");
    }
    if (samples_.front().first != 0.0 || samples_.front().second != 0.0) {
        throw ConfigError("ThrustCurve: first sample must be (0, 0)");
    }
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const auto& [pwm, thrust] = samples_[i];
        if (!std::isfinite(pwm) || !std::isfinite(thrust) || pwm < 0.0 || pwm > 1.0 || thrust < 0.0) {
            throw ConfigError("ThrustCurve: samples must be finite, pwm in [0,1], thrust >= 0");
        }
        if (i > 0) {
            if (pwm <= samples_[i - 1].first) {
                throw ConfigError("ThrustCurve: pwm samples must be strictly increasing");
            }
            if (thrust < samples_[i - 1].second) {
                throw ConfigError("ThrustCurve: thrust samples must be non-decreasing");
            }
        }
    }
    if (mode_ == CurveInterp::MonotoneCubic) {
        tangents_ = monotone_tangents(samples_);
    }
}

double ThrustCurve::pwm_to_thrust(double duty) const {
    if (!(duty >= 0.0) || duty > 1.0) {
        throw std::invalid_argument("pwm_to_thrust: duty must be in [0, 1]");
    }
    if (duty <= samples_.front().first) return samples_.front().second;
    if (duty >= samples_.back().first) return samples_.back().second;

    auto it = std::upper_bound(samples_.begin(), samples_.end(), duty,
                               [](double d, const auto& s) { return d < s.first; });
    const std::size_t i = static_cast<std::size_t>(it - samples_.begin()) - 1;
    const auto& [x0, y0] = samples_[i];
    const auto& [x1, y1] = samples_[i + 1];
    if (mode_ == CurveInterp::Linear) {
        return y0 + (y1 - y0) * (duty - x0) / (x1 - x0);
    }
    return hermite(duty, x0, x1, y0, y1, tangents_[i], tangents_[i + 1]);
}

double ThrustCurve::thrust_to_pwm(double thrust) const {
    if (!(thrust >= 0.0)) {
        throw std::invalid_argument("thrust_to_pwm: thrust must be >= 0");
    }
    if (thrust >= max_thrust()) return samples_.back().first;
    if (thrust <= 0.0) return samples_.front().first;

    auto it = std::upper_bound(samples_.begin(), samples_.end(), thrust,
                               [](double t, const auto& s) { return t < s.second; });
    std::size_t i = static_cast<std::size_t>(it - samples_.begin());
    if (i > 0) --i;
    if (i + 1 >= samples_.size()) i = samples_.size() - 2;

    // Flat segments (equal thrusts) map to the segment's left edge.
    const auto& [x0, y0] = samples_[i];
    const auto& [x1, y1] = samples_[i + 1];
    if (y1 == y0) return x0;

    if (mode_ == CurveInterp::Linear) {
        return x0 + (x1 - x0) * (thrust - y0) / (y1 - y0);
    }

    // The segment cubic is monotone, so bisection converges cleanly.
    double lo = x0, hi = x1;
    for (int iter = 0; iter < 80; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (hermite(mid, x0, x1, y0, y1, tangents_[i], tangents_[i + 1]) < thrust) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-14) break;
    }
    return 0.5 * (lo + hi);
}

Mat4 mixing_matrix(const InertiaParams& params) {
    const double b = params.thrust_coeff;
    const double l = params.yaw_coeff;
    Mat4 B;
    B << b / params.mass, b / params.mass, b / params.mass, b / params.mass,
         0.0, -b / params.Ix, 0.0, b / params.Ix,
         -b / params.Iy, 0.0, b / params.Iy, 0.0,
         -l / params.Iz, l / params.Iz, -l / params.Iz, l / params.Iz;
    return B;
}

ControlInput mix_forward(const RotorSpeeds& omegas, const InertiaParams& params) {
    Vec4 sq;
    for (int i = 0; i < 4; ++i) {
        sq(i) = omegas.omega[static_cast<std::size_t>(i)] * omegas.omega[static_cast<std::size_t>(i)];
    }
    const Vec4 u = mixing_matrix(params) * sq;
    return {u(0), u(1), u(2), u(3)};
}

RotorSpeeds mix_inverse(const ControlInput& u, const InertiaParams& params) {
    const Vec4 sq = mixing_matrix(params).fullPivLu().solve(u.vec());
    RotorSpeeds out;
    for (int i = 0; i < 4; ++i) {
        double s = sq(i);
        if (s < 0.0) {
            if (s > -1e-9 * std::max(1.0, sq.cwiseAbs().maxCoeff())) {
                s = 0.0;  // rounding noise
            } else {
                std::ostringstream oss;
                oss << "mix_inverse: rotor " << i + 1 << " demands omega^2 = " << s
                    << " < 0; input (u1=" << u.u1 << ", u2=" << u.u2 << ", u3=" << u.u3
                    << ", u4=" << u.u4 << ") is infeasible";
                throw SaturationError(oss.str(), i);
            }
        }
        out.omega[static_cast<std::size_t>(i)] = std::sqrt(s);
    }
    return out;
}

double pwm_to_thrust(double duty, const ThrustCurve& curve) { return curve.pwm_to_thrust(duty); }
double thrust_to_pwm(double thrust, const ThrustCurve& curve) { return curve.thrust_to_pwm(thrust); }

}  // namespace noninertial
