#include "noninertial/estimators.hpp"

#include <Eigen/Eigenvalues>

#include <sstream>

namespace noninertial {

namespace {

constexpr double kSymmetryTol = 1e-9;
constexpr double kMaxConditionNumber = 1e12;

template <int N>
using MatN = Eigen::Matrix<double, N, N>;
template <int N>
using VecN = Eigen::Matrix<double, N, 1>;

template <int N>
MatN<N> fd_jacobian_impl(const std::function<VecN<N>(const VecN<N>&)>& f, const VecN<N>& x, double eps) {
    if (!(eps > 0.0)) {
        throw std::invalid_argument("fd_jacobian: epsilon must be > 0");
    }
    const VecN<N> f0 = f(x);
    if (!f0.allFinite()) {
        throw FilterError("fd_jacobian: non-finite map evaluation at the expansion point");
    }
    MatN<N> J;
    for (int i = 0; i < N; ++i) {
        VecN<N> xp = x;
        xp(i) += eps;
        const double step = xp(i) - x(i);  // realized step, absorbs representation rounding
        const VecN<N> fi = f(xp);
        if (!fi.allFinite()) {
            std::ostringstream oss;
            oss << "fd_jacobian: non-finite map evaluation on column " << i;
            throw FilterError(oss.str());
        }
        J.col(i) = (fi - f0) / step;
    }
    return J;
}

// Force symmetry; returns true when the asymmetry exceeded tolerance.
template <int N>
bool resymmetrize(MatN<N>& P) {
    const double asym = (P - P.transpose()).template lpNorm<Eigen::Infinity>();
    P = (0.5 * (P + P.transpose())).eval();
    return asym > kSymmetryTol;
}

// Shared measurement update for a position-only observation y = H x + v,
// H selecting the even-indexed (position) rows.
template <int N>
struct KalmanUpdateOut {
    VecN<N> state;
    MatN<N> covariance;
    Vec3 innovation;
    Mat3 S;
    double nis;
    bool resymmetrized;
};

template <int N>
KalmanUpdateOut<N> position_update(const VecN<N>& x, const MatN<N>& P, const Vec3& y, const Mat3& R,
                                   bool joseph) {
    Eigen::Matrix<double, 3, N> H = Eigen::Matrix<double, 3, N>::Zero();
    H(0, 0) = 1.0;
    H(1, 2) = 1.0;
    H(2, 4) = 1.0;

    const Mat3 S = H * P * H.transpose() + R;
    Eigen::SelfAdjointEigenSolver<Mat3> es(S);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(lmin > 0.0) || lmax / lmin > kMaxConditionNumber) {
        std::ostringstream oss;
        oss << "innovation covariance is singular (eigenvalues " << es.eigenvalues().transpose() << ")";
        throw SingularInnovationError(oss.str());
    }

    const Eigen::Matrix<double, N, 3> K = P * H.transpose() * S.inverse();
    const Vec3 innovation = y - H * x;

    KalmanUpdateOut<N> out;
    out.state = x + K * innovation;
    if (joseph) {
        const MatN<N> IKH = MatN<N>::Identity() - K * H;
        out.covariance = IKH * P * IKH.transpose() + K * R * K.transpose();
    } else {
        out.covariance = (MatN<N>::Identity() - K * H) * P;
    }
    out.resymmetrized = resymmetrize<N>(out.covariance);
    out.innovation = innovation;
    out.S = S;
    out.nis = innovation.dot(S.llt().solve(innovation));
    return out;
}

// Attitude dynamics (f2 rows): rate-product gyroscopic terms plus commanded
// angular accelerations.
Vec6 attitude_derivative(const Vec6& x, const ControlInput& u, const Mat3& coupling) {
    Vec6 d;
    d(0) = x(1);
    d(1) = coupling(0, 0) * x(3) * x(5) + u.u2;
    d(2) = x(3);
    d(3) = coupling(1, 1) * x(1) * x(5) + u.u3;
    d(4) = x(5);
    d(5) = coupling(2, 2) * x(1) * x(3) + u.u4;
    return d;
}

Vec6 attitude_predict_map(const Vec6& x, const ControlInput& u, const Mat3& coupling, double Ts) {
    const Vec6 k1 = attitude_derivative(x, u, coupling);
    const Vec6 k2 = attitude_derivative(x + 0.5 * Ts * k1, u, coupling);
    const Vec6 k3 = attitude_derivative(x + 0.5 * Ts * k2, u, coupling);
    const Vec6 k4 = attitude_derivative(x + Ts * k3, u, coupling);
    return x + (Ts / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

Vec9 ExtendedState::vector() const {
    Vec9 v;
    v << px, vx, py, vy, pz, vz, d1, d2, d3;
    return v;
}

ExtendedState ExtendedState::from_vector(const Vec9& v) {
    ExtendedState z;
    z.px = v(0);
    z.vx = v(1);
    z.py = v(2);
    z.vy = v(3);
    z.pz = v(4);
    z.vz = v(5);
    z.d1 = v(6);
    z.d2 = v(7);
    z.d3 = v(8);
    return z;
}

Vec6 AttitudeState::vector() const {
    Vec6 v;
    v << phi, phi_dot, theta, theta_dot, psi, psi_dot;
    return v;
}

AttitudeState AttitudeState::from_vector(const Vec6& v, const Mat6& cov) {
    AttitudeState a;
    a.phi = v(0);
    a.phi_dot = v(1);
    a.theta = v(2);
    a.theta_dot = v(3);
    a.psi = v(4);
    a.psi_dot = v(5);
    a.covariance = cov;
    return a;
}

Mat9 FilterConfig::Q_aug() const {
    Mat9 Q = Mat9::Zero();
    Q.topLeftCorner<6, 6>() = Q_core;
    Q.bottomRightCorner<3, 3>() = Q_d;
    return Q;
}

void FilterConfig::validate() const {
    auto check_psd = [](const auto& M, const char* name) {
        if ((M - M.transpose()).template lpNorm<Eigen::Infinity>() > 1e-9) {
            throw ConfigError(std::string("FilterConfig: ") + name + " must be symmetric");
        }
        Eigen::SelfAdjointEigenSolver<std::decay_t<decltype(M)>> es(M);
        if (es.eigenvalues().minCoeff() < -1e-12) {
            throw ConfigError(std::string("FilterConfig: ") + name + " must be positive semidefinite");
        }
    };
    check_psd(Q_core, "Q_core");
    check_psd(Q_d, "Q_d");
    check_psd(R, "R");
    check_psd(P0, "P0");
    if (!(Ts > 0.0)) throw ConfigError("FilterConfig: Ts must be > 0");
    if (!(epsilon_fd > 0.0)) throw ConfigError("FilterConfig: epsilon_fd must be > 0");
    if (!(gravity > 0.0)) throw ConfigError("FilterConfig: gravity must be > 0");
}

Mat9 fd_jacobian(const std::function<Vec9(const Vec9&)>& f, const ExtendedState& z_hat, double epsilon) {
    return fd_jacobian_impl<9>(f, z_hat.vector(), epsilon);
}

Vec9 ekfui_predict_map(const Vec9& z, double u1, double phi, double theta, double psi,
                       double Ts, double gravity) {
    const Vec3 a = thrust_gravity_accel(u1, phi, theta, psi, gravity);
    Vec9 out;
    for (int axis = 0; axis < 3; ++axis) {
        const double p = z(2 * axis);
        const double v = z(2 * axis + 1);
        const double d = z(6 + axis);
        out(2 * axis) = p + Ts * v + 0.5 * Ts * Ts * a(axis);
        out(2 * axis + 1) = v + Ts * a(axis) - Ts * d;
        out(6 + axis) = d;
    }
    return out;
}

Vec6 baseline_predict_map(const Vec6& z, double u1, double phi, double theta, double psi,
                          double Ts, double gravity) {
    const Vec3 a = thrust_gravity_accel(u1, phi, theta, psi, gravity);
    Vec6 out;
    for (int axis = 0; axis < 3; ++axis) {
        const double p = z(2 * axis);
        const double v = z(2 * axis + 1);
        out(2 * axis) = p + Ts * v + 0.5 * Ts * Ts * a(axis);
        out(2 * axis + 1) = v + Ts * a(axis);
    }
    return out;
}

FilterState ekfui_predict(const FilterState& fs, const ControlInput& u, const AttitudeState& attitude,
                          const FilterConfig& cfg) {
    const double phi = attitude.phi, theta = attitude.theta, psi = attitude.psi;
    const auto f = [&](const Vec9& z) {
        return ekfui_predict_map(z, u.u1, phi, theta, psi, cfg.Ts, cfg.gravity);
    };

    const Vec9 z0 = fs.estimate.vector();
    const Mat9 F = fd_jacobian_impl<9>(f, z0, cfg.epsilon_fd);
    const Vec9 z1 = f(z0);

    FilterState out = fs;
    out.estimate = ExtendedState::from_vector(z1);
    out.covariance = F * fs.covariance * F.transpose() + cfg.Q_aug();
    if (resymmetrize<9>(out.covariance)) ++out.resymmetrize_events;

    if (!z1.allFinite() || !out.covariance.allFinite()) {
        throw FilterError("ekfui_predict: filter diverged (non-finite state or covariance)");
    }
    return out;
}

UpdateResult ekfui_update(const FilterState& fs, const Vec3& y, const FilterConfig& cfg, double time) {
    auto up = position_update<9>(fs.estimate.vector(), fs.covariance, y, cfg.R, cfg.joseph_update);

    UpdateResult res;
    res.state = fs;
    res.state.estimate = ExtendedState::from_vector(up.state);
    res.state.covariance = up.covariance;
    res.state.last_update_time = time;
    if (up.resymmetrized) ++res.state.resymmetrize_events;
    res.innovation = {time, up.innovation, up.S, up.nis};

    if (!up.state.allFinite()) {
        throw FilterError("ekfui_update: filter diverged (non-finite state)");
    }
    return res;
}

StepResult ekfui_step(const FilterState& fs, const ControlInput& u, const AttitudeState& attitude,
                      const std::optional<Vec3>& y, const FilterConfig& cfg, double time) {
    StepResult res;
    res.state = ekfui_predict(fs, u, attitude, cfg);
    if (y) {
        auto up = ekfui_update(res.state, *y, cfg, time);
        res.state = up.state;
        res.innovation = up.innovation;
    }
    return res;
}

BaselineStepResult ekf_baseline_step(const BaselineState& fs, const ControlInput& u,
                                     const AttitudeState& attitude, const std::optional<Vec3>& y,
                                     const FilterConfig& cfg, double time) {
    const double phi = attitude.phi, theta = attitude.theta, psi = attitude.psi;
    const auto f = [&](const Vec6& z) {
        return baseline_predict_map(z, u.u1, phi, theta, psi, cfg.Ts, cfg.gravity);
    };

    BaselineStepResult res;
    res.state = fs;

    const Mat6 F = fd_jacobian_impl<6>(f, fs.state, cfg.epsilon_fd);
    res.state.state = f(fs.state);
    res.state.covariance = F * fs.covariance * F.transpose() + cfg.Q_core;
    if (resymmetrize<6>(res.state.covariance)) ++res.state.resymmetrize_events;
    if (!res.state.state.allFinite() || !res.state.covariance.allFinite()) {
        throw FilterError("ekf_baseline_step: filter diverged");
    }

    if (y) {
        auto up = position_update<6>(res.state.state, res.state.covariance, *y, cfg.R, cfg.joseph_update);
        res.state.state = up.state;
        res.state.covariance = up.covariance;
        res.state.last_update_time = time;
        if (up.resymmetrized) ++res.state.resymmetrize_events;
        res.innovation = InnovationRecord{time, up.innovation, up.S, up.nis};
    }
    return res;
}

AttitudeState attitude_ekf_step(const AttitudeState& as, const ControlInput& u,
                                const std::optional<Vec3>& angles_meas, const AttitudeFilterConfig& cfg,
                                const InertiaParams& params) {
    const Mat3 coupling = coupling_matrix(params);
    const auto f = [&](const Vec6& x) { return attitude_predict_map(x, u, coupling, cfg.Ts); };

    const Mat6 F = fd_jacobian_impl<6>(f, as.vector(), cfg.epsilon_fd);
    Vec6 x = f(as.vector());
    Mat6 P = F * as.covariance * F.transpose() + cfg.Q;
    resymmetrize<6>(P);

    if (angles_meas) {
        Eigen::Matrix<double, 3, 6> H = Eigen::Matrix<double, 3, 6>::Zero();
        H(0, 0) = 1.0;
        H(1, 2) = 1.0;
        H(2, 4) = 1.0;
        const Mat3 S = H * P * H.transpose() + cfg.R;
        Eigen::SelfAdjointEigenSolver<Mat3> es(S);
        if (!(es.eigenvalues().minCoeff() > 0.0) ||
            es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff() > kMaxConditionNumber) {
            throw SingularInnovationError("attitude_ekf_step: singular innovation covariance");
        }
        const Eigen::Matrix<double, 6, 3> K = P * H.transpose() * S.inverse();
        Vec3 innovation;
        for (int i = 0; i < 3; ++i) {
            innovation(i) = angle_diff((*angles_meas)(i), x(2 * i));
        }
        x = x + K * innovation;
        P = (Mat6::Identity() - K * H) * P;
        resymmetrize<6>(P);
    }

    if (!x.allFinite() || !P.allFinite()) {
        throw FilterError("attitude_ekf_step: filter diverged");
    }
    for (int i = 0; i < 3; ++i) {
        x(2 * i) = wrap_angle(x(2 * i));
    }
    return AttitudeState::from_vector(x, P);
}

FilterState init_filter(const Vec3& first_position, const FilterConfig& cfg) {
    FilterState fs;
    fs.estimate = ExtendedState{};
    fs.estimate.px = first_position.x();
    fs.estimate.py = first_position.y();
    fs.estimate.pz = first_position.z();
    fs.covariance = cfg.P0;
    return fs;
}

BaselineState init_baseline(const Vec3& first_position, const FilterConfig& cfg) {
    BaselineState fs;
    fs.state.setZero();
    fs.state(0) = first_position.x();
    fs.state(2) = first_position.y();
    fs.state(4) = first_position.z();
    fs.covariance = cfg.P0.topLeftCorner<6, 6>();
    return fs;
}

AttitudeState init_attitude(const Vec3& first_angles, const AttitudeFilterConfig& cfg) {
    AttitudeState as;
    as.phi = first_angles.x();
    as.theta = first_angles.y();
    as.psi = first_angles.z();
    as.covariance = cfg.P0;
    return as;
}

}  // namespace noninertial
