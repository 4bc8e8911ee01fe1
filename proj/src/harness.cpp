#include "noninertial/harness.hpp"

#include "noninertial/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace noninertial {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::uint64_t fnv1a_update(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t stream_checksum(const std::vector<TimedMeasurement>& a,
                              const std::vector<TimedMeasurement>& b) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto add = [&h](const std::vector<TimedMeasurement>& v) {
        for (const auto& m : v) {
            double vals[7] = {m.timestamp, m.position.x(), m.position.y(), m.position.z(),
                              m.orientation.x(), m.orientation.y(), m.orientation.z()};
            h = fnv1a_update(h, vals, sizeof(vals));
        }
    };
    add(a);
    add(b);
    return h;
}

// Pre-generated sample schedule and noise for one stream; independent of the
// trajectory so paired runs share realizations.
struct StreamPlan {
    std::vector<double> times;
    std::vector<Vec3> pos_noise;
    std::vector<Vec3> ori_noise;
};

StreamPlan plan_stream(const StreamConfig& stream, const NoiseConfig& noise, double duration,
                       std::uint64_t seed) {
    StreamPlan plan;
    GaussianSampler rng(seed);
    const double dt = 1.0 / stream.rate;
    for (std::size_t k = 0;; ++k) {
        const double nominal = stream.phase + static_cast<double>(k) * dt;
        if (nominal > duration) break;
        double t = nominal + rng.next(noise.time_jitter_sigma);
        t = std::clamp(t, 0.0, duration);
        plan.times.push_back(t);
        plan.pos_noise.push_back(rng.next_vec3(noise.pos_sigma));
        plan.ori_noise.push_back(rng.next_vec3(noise.ori_sigma));
    }
    // Jitter can locally reorder; timestamps per stream must be monotone.
    std::vector<std::size_t> order(plan.times.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return plan.times[i] < plan.times[j]; });
    StreamPlan sorted;
    for (std::size_t i : order) {
        sorted.times.push_back(plan.times[i]);
        sorted.pos_noise.push_back(plan.pos_noise[i]);
        sorted.ori_noise.push_back(plan.ori_noise[i]);
    }
    return sorted;
}

Vec12 lerp_state(const Vec12& a, const Vec12& b, double frac) {
    Vec12 out = a + frac * (b - a);
    for (int idx : {6, 8, 10}) {
        out(idx) = wrap_angle(a(idx) + frac * angle_diff(b(idx), a(idx)));
    }
    return out;
}

double setpoint_altitude(const ScenarioConfig& sc, double t, double duration) {
    const double alt = sc.hover_altitude;
    if (sc.takeoff_ramp > 0.0 && t < sc.takeoff_ramp) return alt * t / sc.takeoff_ramp;
    if (sc.landing_ramp > 0.0 && t > duration - sc.landing_ramp) {
        return std::max(0.0, alt * (duration - t) / sc.landing_ramp);
    }
    return alt;
}

Mat3 rot_z_t(double yaw) {
    const double c = std::cos(yaw), s = std::sin(yaw);
    Mat3 R;
    R << c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0;
    return R;
}

struct LogRow {
    double t{};
    Vec3 sp = Vec3::Zero();
    Vec3 truth_pos = Vec3::Zero(), truth_vel = Vec3::Zero(), truth_att = Vec3::Zero();
    Vec3 true_d = Vec3::Zero();
    PlatformState cart;
    Vec3 meas_pos{kNan, kNan, kNan};
    double meas_fresh{0.0};
    Vec9 ui = Vec9::Constant(kNan);
    Vec3 ui_dsigma{kNan, kNan, kNan};
    double ui_nees{kNan}, ui_nis{kNan};
    Vec6 ekf = Vec6::Constant(kNan);
    double ekf_nees{kNan}, ekf_nis{kNan};
    double cmd_roll{0.0}, cmd_pitch{0.0}, cmd_pwm{0.0};
    Vec4 cmd_u = Vec4::Zero();
};

const char* kColumns =
    "t,sp_x,sp_y,sp_z,"
    "truth_px,truth_vx,truth_py,truth_vy,truth_pz,truth_vz,"
    "truth_phi,truth_theta,truth_psi,true_d1,true_d2,true_d3,"
    "cart_px,cart_py,cart_pz,cart_vx,cart_vy,cart_vz,cart_ax,cart_ay,cart_az,cart_yaw,"
    "meas_px,meas_py,meas_pz,meas_fresh,"
    "ui_px,ui_vx,ui_py,ui_vy,ui_pz,ui_vz,ui_d1,ui_d2,ui_d3,"
    "ui_sd1,ui_sd2,ui_sd3,ui_nees,ui_nis,"
    "ekf_px,ekf_vx,ekf_py,ekf_vy,ekf_pz,ekf_vz,ekf_nees,ekf_nis,"
    "cmd_roll,cmd_pitch,cmd_pwm,cmd_u1,cmd_u2,cmd_u3,cmd_u4";

void write_row(std::ostream& os, const LogRow& r) {
    os << fmt(r.t);
    auto put = [&os](double v) { os << ',' << fmt(v); };
    for (int i = 0; i < 3; ++i) put(r.sp(i));
    put(r.truth_pos.x());
    put(r.truth_vel.x());
    put(r.truth_pos.y());
    put(r.truth_vel.y());
    put(r.truth_pos.z());
    put(r.truth_vel.z());
    for (int i = 0; i < 3; ++i) put(r.truth_att(i));
    for (int i = 0; i < 3; ++i) put(r.true_d(i));
    for (int i = 0; i < 3; ++i) put(r.cart.pos(i));
    for (int i = 0; i < 3; ++i) put(r.cart.vel(i));
    for (int i = 0; i < 3; ++i) put(r.cart.accel(i));
    put(r.cart.yaw);
    for (int i = 0; i < 3; ++i) put(r.meas_pos(i));
    put(r.meas_fresh);
    for (int i = 0; i < 9; ++i) put(r.ui(i));
    for (int i = 0; i < 3; ++i) put(r.ui_dsigma(i));
    put(r.ui_nees);
    put(r.ui_nis);
    for (int i = 0; i < 6; ++i) put(r.ekf(i));
    put(r.ekf_nees);
    put(r.ekf_nis);
    put(r.cmd_roll);
    put(r.cmd_pitch);
    put(r.cmd_pwm);
    for (int i = 0; i < 4; ++i) put(r.cmd_u(i));
    os << '\n';
}

template <int N>
std::string diag_string(const Eigen::Matrix<double, N, N>& m) {
    std::string s;
    for (int i = 0; i < N; ++i) {
        if (i) s += ' ';
        s += fmt(m(i, i));
    }
    return s;
}

std::string pid_string(const PidGains& g) {
    std::ostringstream oss;
    oss << "kp=" << fmt(g.kP) << " ki=" << fmt(g.kI) << " kd=" << fmt(g.kD)
        << " deriv_tau=" << fmt(g.deriv_tau) << " integ_limit=" << fmt(g.integ_limit);
    return oss.str();
}

}  // namespace

std::string estimator_name(EstimatorChoice c) {
    switch (c) {
        case EstimatorChoice::ekf: return "ekf";
        case EstimatorChoice::ekfui: return "ekfui";
        case EstimatorChoice::both: return "both";
    }
    return "?";
}

EstimatorChoice estimator_from_name(const std::string& name) {
    if (name == "ekf") return EstimatorChoice::ekf;
    if (name == "ekfui") return EstimatorChoice::ekfui;
    if (name == "both") return EstimatorChoice::both;
    throw ConfigError("unknown estimator '" + name + "' (expected ekf|ekfui|both)");
}

void RunConfig::validate() const {
    if (scenario_path.empty()) throw ConfigError("RunConfig: scenario_path is required");
    if (config_path.empty()) throw ConfigError("RunConfig: config_path is required");
    if (repetitions < 1) throw ConfigError("RunConfig: repetitions must be >= 1");
}

namespace {

struct RunContext {
    AppConfig app;
    ScenarioConfig sc;
    double dt;
    double duration;
    int steps_per_filter;
};

RunContext make_context(const RunConfig& cfg) {
    RunContext ctx{load_app_config(cfg.config_path), load_scenario(cfg.scenario_path), 0.0, 0.0, 0};
    ctx.dt = cfg.dt_sim > 0.0 ? cfg.dt_sim : ctx.app.dt_sim;
    ctx.duration = cfg.duration >= 0.0 ? cfg.duration : ctx.sc.duration;
    const double Ts = ctx.app.filter.Ts;
    if (ctx.dt > Ts + 1e-12) {
        throw ConfigError("RunConfig: dt_sim must not exceed the filter step Ts");
    }
    const double ratio = Ts / ctx.dt;
    ctx.steps_per_filter = static_cast<int>(std::lround(ratio));
    if (ctx.steps_per_filter < 1 || std::abs(ratio - ctx.steps_per_filter) > 1e-9) {
        throw ConfigError("RunConfig: filter Ts must be an integer multiple of dt_sim");
    }
    return ctx;
}

void write_header(std::ostream& os, const RunConfig& cfg, const RunContext& ctx,
                  std::uint64_t checksum, double window_start, double window_end) {
    const auto& app = ctx.app;
    os << "# noninertial run log v1\n";
    os << "# scenario: " << ctx.sc.name << "\n";
    os << "# estimator: " << estimator_name(cfg.estimator) << "\n";
    os << "# seed: " << cfg.seed << "\n";
    os << "# dt_sim: " << fmt(ctx.dt) << "\n";
    os << "# duration: " << fmt(ctx.duration) << "\n";
    os << "# filter_ts: " << fmt(app.filter.Ts) << "\n";
    os << "# filter_epsilon_fd: " << fmt(app.filter.epsilon_fd) << "\n";
    os << "# filter_joseph_update: " << (app.filter.joseph_update ? 1 : 0) << "\n";
    os << "# gravity: " << fmt(app.params.g) << "\n";
    os << "# mass: " << fmt(app.params.mass) << "\n";
    os << "# q_core_diag: " << diag_string<6>(app.filter.Q_core) << "\n";
    os << "# q_d_diag: " << diag_string<3>(app.filter.Q_d) << "\n";
    os << "# r_diag: " << diag_string<3>(app.filter.R) << "\n";
    os << "# p0_diag: " << diag_string<9>(app.filter.P0) << "\n";
    os << "# attitude_q_diag: " << diag_string<6>(app.attitude_filter.Q) << "\n";
    os << "# attitude_r_diag: " << diag_string<3>(app.attitude_filter.R) << "\n";
    os << "# attitude_p0_diag: " << diag_string<6>(app.attitude_filter.P0) << "\n";
    os << "# gains: kpxy=" << fmt(app.gains.kPxy) << " kpz=" << fmt(app.gains.kPz)
       << " att_kp=" << fmt(app.gains.att_kP) << " att_kd=" << fmt(app.gains.att_kD)
       << " yaw_damping=" << fmt(app.gains.yaw_damping)
       << " rate_limit=" << fmt(app.gains.attitude_rate_limit)
       << " saturation=" << fmt(app.gains.attitude_saturation)
       << " moment_limit=" << fmt(app.gains.moment_limit) << "\n";
    os << "# gains_vel_x: " << pid_string(app.gains.vel_x) << "\n";
    os << "# gains_vel_y: " << pid_string(app.gains.vel_y) << "\n";
    os << "# gains_vel_z: " << pid_string(app.gains.vel_z) << "\n";
    os << "# noise: pos_sigma=" << fmt(ctx.sc.noise.pos_sigma)
       << " ori_sigma=" << fmt(ctx.sc.noise.ori_sigma)
       << " time_jitter_sigma=" << fmt(ctx.sc.noise.time_jitter_sigma) << "\n";
    os << "# sync_window: " << fmt(ctx.sc.sync_window) << "\n";
    os << "# window_start: " << fmt(window_start) << "\n";
    os << "# window_end: " << fmt(window_end) << "\n";
    os << "# stream_checksum: " << checksum << "\n";
}

}  // namespace

void write_metrics_file(const std::string& path, const RunMetrics& m) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write metrics file: " + path);
    os << "metric,value\n";
    auto put = [&os](const std::string& k, double v) { os << k << ',' << fmt(v) << '\n'; };
    auto put_vec = [&put](const std::string& k, const Vec3& v) {
        put(k + "_x", v.x());
        put(k + "_y", v.y());
        put(k + "_z", v.z());
    };
    if (m.ekfui) {
        put_vec("ekfui_pos_rmse", m.ekfui->pos_rmse);
        put_vec("ekfui_vel_rmse", m.ekfui->vel_rmse);
        put_vec("ekfui_dhat_rmse", m.ekfui->dhat_rmse);
        put_vec("ekfui_vel_total_variation", m.ekfui->vel_total_variation);
        put("ekfui_nees_mean", m.ekfui->nees_mean);
        put("ekfui_nees_coverage", m.ekfui->nees_coverage);
    }
    if (m.ekf) {
        put_vec("ekf_pos_rmse", m.ekf->pos_rmse);
        put_vec("ekf_vel_rmse", m.ekf->vel_rmse);
        put_vec("ekf_vel_total_variation", m.ekf->vel_total_variation);
        put("ekf_nees_mean", m.ekf->nees_mean);
        put("ekf_nees_coverage", m.ekf->nees_coverage);
    }
    put("tracking_rmse", m.tracking_rmse);
    put("saturation_events", m.saturation_events);
    put("stale_sync_events", m.stale_sync_events);
    put("window_start", m.window_start);
    put("window_end", m.window_end);
    os << "stream_checksum," << m.stream_checksum << '\n';
}

RunResult run_scenario(const RunConfig& cfg) {
    cfg.validate();
    RunContext ctx = make_context(cfg);
    const auto& app = ctx.app;
    const auto& sc = ctx.sc;
    const double dt = ctx.dt;
    const double T = ctx.duration;
    const double Ts = app.filter.Ts;

    const ThrustCurve curve = load_thrust_curve(app.thrust_curve_file);

    const bool run_ui = cfg.estimator != EstimatorChoice::ekf;
    const bool run_base = cfg.estimator != EstimatorChoice::ekfui;

    const StreamPlan drone_plan = plan_stream(sc.drone_stream, sc.noise, T, derive_seed(cfg.seed, 1));
    const StreamPlan platform_plan =
        plan_stream(sc.platform_stream, sc.noise, T, derive_seed(cfg.seed, 2));

    RunResult result;
    const double window_start = sc.metrics_margin;
    const double window_end = T - sc.metrics_margin;
    result.metrics.window_start = window_start;
    result.metrics.window_end = window_end;

    std::vector<TimedMeasurement> drone_all, platform_all;
    std::deque<TimedMeasurement> drone_pending;
    std::vector<LogRow> rows;

    FullState truth;  // world frame; the cart frame starts coincident
    CascadeController ctrl(app.gains, app.params.mass, app.params.g);
    std::optional<AttitudeState> att;
    std::optional<FilterState> ui;
    std::optional<BaselineState> base;
    ControlInput u;  // zero-order hold between filter steps
    double cmd_roll = 0.0, cmd_pitch = 0.0, cmd_pwm = 0.0;
    bool bounds_flagged = false;
    bool pitch_flagged = false;

    std::optional<FilterError> divergence;

    if (T > 0.0) {
        const long n_steps = std::lround(T / dt);
        std::size_t di = 0, pi = 0;
        Vec12 prev_vec = truth.vector();

        for (long k = 0; k <= n_steps; ++k) {
            const double t = static_cast<double>(k) * dt;
            const Vec12 cur_vec = truth.vector();
            const PlatformState cart = platform_state_at(sc.motion, t);

            // Emit stream samples due by now; values interpolate the last
            // sim interval (or the initial state for clamped-to-zero times).
            auto value_at = [&](double ts) {
                const double lo = std::max(0.0, t - dt);
                const double tau = std::clamp(ts, lo, t);
                const double frac = (t > lo) ? (tau - lo) / (t - lo) : 1.0;
                const Vec12 sv = (k == 0) ? cur_vec : lerp_state(prev_vec, cur_vec, frac);
                return std::make_pair(FullState::from_vector(sv), platform_state_at(sc.motion, tau));
            };
            while (di < drone_plan.times.size() && drone_plan.times[di] <= t + 1e-12) {
                const auto [sv, cartv] = value_at(drone_plan.times[di]);
                TimedMeasurement m;
                m.timestamp = drone_plan.times[di];
                m.source = StreamSource::drone_stream;
                m.position = relative_position(sv.position(), cartv) + drone_plan.pos_noise[di];
                const Vec3 rel = relative_orientation(sv.angles(), cartv.yaw);
                for (int i = 0; i < 3; ++i) {
                    m.orientation(i) = wrap_angle(rel(i) + drone_plan.ori_noise[di](i));
                }
                drone_all.push_back(m);
                drone_pending.push_back(m);
                ++di;
            }
            while (pi < platform_plan.times.size() && platform_plan.times[pi] <= t + 1e-12) {
                const auto cartv = platform_state_at(sc.motion, platform_plan.times[pi]);
                TimedMeasurement m;
                m.timestamp = platform_plan.times[pi];
                m.source = StreamSource::platform_stream;
                m.position = cartv.pos + platform_plan.pos_noise[pi];
                m.orientation = {wrap_angle(platform_plan.ori_noise[pi].x()),
                                 wrap_angle(platform_plan.ori_noise[pi].y()),
                                 wrap_angle(cartv.yaw + platform_plan.ori_noise[pi].z())};
                platform_all.push_back(m);
                ++pi;
            }

            if (k % ctx.steps_per_filter == 0) {
                LogRow row;
                row.t = t;
                const double alt_sp = setpoint_altitude(sc, t, T);
                row.sp = Vec3(0.0, 0.0, alt_sp);

                if (!sc.bounds.inside_inner(row.sp) && !bounds_flagged) {
                    bounds_flagged = true;
                    result.events.push_back({t, "setpoint_out_of_bounds",
                                             "setpoint (" + fmt(row.sp.x()) + "," + fmt(row.sp.y()) +
                                                 "," + fmt(row.sp.z()) + ") outside inner volume"});
                }

                std::optional<TimedMeasurement> meas;
                while (!drone_pending.empty() && drone_pending.front().timestamp <= t + 1e-12) {
                    meas = drone_pending.front();
                    drone_pending.pop_front();
                }

                // Truth in the platform frame (exact, including the yaw-ramp
                // rotation term).
                row.truth_pos = relative_position(truth.position(), cart);
                row.truth_vel = relative_velocity(truth.position(), truth.velocity(), cart);
                row.truth_att = relative_orientation(truth.angles(), cart.yaw);
                row.true_d = rot_z_t(cart.yaw) * cart.accel;
                row.cart = cart;

                if (std::abs(truth.theta) > 80.0 * M_PI / 180.0 && !pitch_flagged) {
                    pitch_flagged = true;
                    result.events.push_back({t, "pitch_near_singular", "theta=" + fmt(truth.theta)});
                }

                try {
                    // Attitude filter first; the translational filters use its
                    // freshest estimate for the thrust projection.
                    if (!att && meas) {
                        att = init_attitude(meas->orientation, app.attitude_filter);
                        result.events.push_back({t, "attitude_filter_init", ""});
                    } else if (att) {
                        std::optional<Vec3> ameas;
                        if (meas) ameas = meas->orientation;
                        *att = attitude_ekf_step(*att, u, ameas, app.attitude_filter, app.params);
                    }

                    AttitudeState att_feed;
                    if (app.use_true_attitude) {
                        att_feed.phi = row.truth_att.x();
                        att_feed.theta = row.truth_att.y();
                        att_feed.psi = row.truth_att.z();
                        const Vec3 rates = truth.angle_rates();
                        att_feed.phi_dot = rates.x();
                        att_feed.theta_dot = rates.y();
                        att_feed.psi_dot = rates.z() - cart.yaw_rate;
                    } else if (att) {
                        att_feed = *att;
                    }

                    std::optional<Vec3> y;
                    if (meas) y = meas->position;

                    if (run_ui) {
                        if (!ui && meas) {
                            ui = init_filter(meas->position, app.filter);
                            result.events.push_back({t, "ekfui_init", ""});
                        } else if (ui) {
                            auto step = ekfui_step(*ui, u, att_feed, y, app.filter, t);
                            ui = step.state;
                            row.ui_nis = step.innovation ? step.innovation->nis : kNan;
                        }
                    }
                    if (run_base) {
                        if (!base && meas) {
                            base = init_baseline(meas->position, app.filter);
                            result.events.push_back({t, "ekf_init", ""});
                        } else if (base) {
                            auto step = ekf_baseline_step(*base, u, att_feed, y, app.filter, t);
                            base = step.state;
                            row.ekf_nis = step.innovation ? step.innovation->nis : kNan;
                        }
                    }
                } catch (const FilterError& e) {
                    divergence = e;
                    result.events.push_back({t, "filter_diverged", e.what()});
                }
                if (divergence) {
                    rows.push_back(row);
                    break;
                }

                if (meas) {
                    row.meas_pos = meas->position;
                    row.meas_fresh = 1.0;
                }

                if (ui) {
                    Vec9 truth9;
                    truth9 << row.truth_pos.x(), row.truth_vel.x(), row.truth_pos.y(),
                        row.truth_vel.y(), row.truth_pos.z(), row.truth_vel.z(), row.true_d.x(),
                        row.true_d.y(), row.true_d.z();
                    row.ui = ui->estimate.vector();
                    row.ui_nees = nees(Vec9(truth9 - row.ui), ui->covariance);
                    row.ui_dsigma = Vec3(std::sqrt(ui->covariance(6, 6)), std::sqrt(ui->covariance(7, 7)),
                                         std::sqrt(ui->covariance(8, 8)));
                }
                if (base) {
                    Vec6 truth6;
                    truth6 << row.truth_pos.x(), row.truth_vel.x(), row.truth_pos.y(),
                        row.truth_vel.y(), row.truth_pos.z(), row.truth_vel.z();
                    row.ekf = base->state;
                    row.ekf_nees = nees(Vec6(truth6 - base->state), base->covariance);
                }

                // Controller from the selected estimator's feedback.
                const bool feedback_ready =
                    att && ((cfg.estimator == EstimatorChoice::ekf) ? bool(base) : bool(ui));
                if (feedback_ready) {
                    Vec3 p_est, v_est;
                    if (cfg.estimator == EstimatorChoice::ekf) {
                        p_est = {base->state(0), base->state(2), base->state(4)};
                        v_est = {base->state(1), base->state(3), base->state(5)};
                    } else {
                        p_est = ui->estimate.position();
                        v_est = ui->estimate.velocity();
                    }
                    const AttitudeState& att_ctrl = *att;
                    Setpoint sp{row.sp.x(), row.sp.y(), row.sp.z(), 0.0};
                    auto [rc, pc] = ctrl.horizontal_control(sp, {p_est.x(), p_est.y()},
                                                            {v_est.x(), v_est.y()}, att_ctrl.psi, Ts);
                    cmd_roll = rc;
                    cmd_pitch = pc;
                    cmd_pwm = ctrl.vertical_control(sp, p_est.z(), v_est.z(), curve, Ts);
                    const Vec3 moments = ctrl.attitude_loop(cmd_roll, cmd_pitch, att_ctrl);
                    u.u1 = curve.pwm_to_thrust(cmd_pwm) / app.params.mass;
                    u.u2 = moments.x();
                    u.u3 = moments.y();
                    u.u4 = moments.z();
                }
                row.cmd_roll = cmd_roll;
                row.cmd_pitch = cmd_pitch;
                row.cmd_pwm = cmd_pwm;
                row.cmd_u = u.vec();
                rows.push_back(row);
            }

            if (k < n_steps) {
                prev_vec = cur_vec;
                const ControlInput u_hold = u;
                truth = integrate_step(
                    truth,
                    [&](const Vec12& s) { return inertial_derivative(s, u_hold, app.params); }, dt);
            }
        }
    }

    // Post-run stream synchronization (the logging filter of the testbed).
    const auto pairs = synchronize(drone_all, platform_all, sc.sync_window);
    int stale = 0;
    for (const auto& p : pairs) {
        if (p.stale) ++stale;
    }
    if (stale > 0) {
        result.events.push_back(
            {T, "stale_sync", fmt(static_cast<double>(stale)) + " drone samples without cart pairing"});
    }

    // Assemble traces and metrics.
    for (const auto& r : rows) {
        result.truth.t.push_back(r.t);
        result.truth.pos.push_back(r.truth_pos);
        result.truth.vel.push_back(r.truth_vel);
        result.truth.true_d.push_back(r.true_d);
        result.truth.setpoint.push_back(r.sp);
        if (run_ui) {
            result.ekfui_trace.t.push_back(r.t);
            result.ekfui_trace.pos.push_back({r.ui(0), r.ui(2), r.ui(4)});
            result.ekfui_trace.vel.push_back({r.ui(1), r.ui(3), r.ui(5)});
            result.ekfui_trace.dhat.push_back({r.ui(6), r.ui(7), r.ui(8)});
            result.ekfui_trace.nees.push_back(r.ui_nees);
            result.ekfui_trace.nis.push_back(r.ui_nis);
            result.dhat_sigma.push_back(r.ui_dsigma);
        }
        if (run_base) {
            result.ekf_trace.t.push_back(r.t);
            result.ekf_trace.pos.push_back({r.ekf(0), r.ekf(2), r.ekf(4)});
            result.ekf_trace.vel.push_back({r.ekf(1), r.ekf(3), r.ekf(5)});
            result.ekf_trace.nees.push_back(r.ekf_nees);
            result.ekf_trace.nis.push_back(r.ekf_nis);
        }
    }

    result.metrics = compute_metrics(result.truth, result.ekfui_trace, result.ekf_trace,
                                     window_start, window_end);
    result.metrics.saturation_events = ctrl.saturation_events();
    result.metrics.stale_sync_events = stale;
    result.metrics.stream_checksum = stream_checksum(drone_all, platform_all);

    int resym = 0;
    if (ui) resym += ui->resymmetrize_events;
    if (base) resym += base->resymmetrize_events;
    if (resym > 0) {
        result.events.push_back({T, "covariance_resymmetrized", fmt(static_cast<double>(resym)) + " times"});
    }

    if (!cfg.output_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.output_dir);
        result.run_dir = cfg.output_dir;

        {
            std::ofstream os(cfg.output_dir + "/timeseries.csv");
            if (!os) throw std::runtime_error("cannot write " + cfg.output_dir + "/timeseries.csv");
            write_header(os, cfg, ctx, result.metrics.stream_checksum, window_start, window_end);
            os << "# saturation_events: " << result.metrics.saturation_events << "\n";
            os << "# stale_sync_events: " << result.metrics.stale_sync_events << "\n";
            os << kColumns << '\n';
            for (const auto& r : rows) write_row(os, r);
        }
        write_metrics_file(cfg.output_dir + "/metrics.csv", result.metrics);
        {
            std::ofstream os(cfg.output_dir + "/events.csv");
            os << "time,type,detail\n";
            for (const auto& e : result.events) {
                std::string detail = e.detail;
                std::replace(detail.begin(), detail.end(), ',', ';');
                std::replace(detail.begin(), detail.end(), '\n', ' ');
                os << fmt(e.time) << ',' << e.type << ',' << detail << '\n';
            }
        }
        if (divergence) {
            std::ofstream os(cfg.output_dir + "/error.txt");
            os << "error = filter_diverged\n";
            os << "detail = " << divergence->what() << "\n";
        }
    }

    if (divergence) {
        throw FilterError(std::string("run aborted: ") + divergence->what());
    }
    return result;
}

std::vector<RunResult> run_repetitions(const RunConfig& cfg) {
    std::vector<RunResult> out;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
        RunConfig one = cfg;
        one.repetitions = 1;
        one.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(rep));
        if (!cfg.output_dir.empty()) {
            char sub[16];
            std::snprintf(sub, sizeof(sub), "rep%03d", rep);
            one.output_dir = cfg.output_dir + "/" + sub;
        }
        out.push_back(run_scenario(one));
    }
    return out;
}

void run_suite(const SuiteConfig& cfg) {
    if (cfg.scenario_paths.empty()) throw ConfigError("run_suite: no scenarios given");
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    std::ofstream summary(cfg.output_dir + "/summary.csv");
    if (!summary) throw std::runtime_error("cannot write suite summary");
    summary << "scenario,feedback,rep,seed,"
               "ekfui_pos_rmse_x,ekfui_pos_rmse_y,ekfui_pos_rmse_z,"
               "ekfui_vel_rmse_x,ekfui_vel_rmse_y,ekfui_vel_rmse_z,"
               "ekf_pos_rmse_x,ekf_pos_rmse_y,ekf_pos_rmse_z,"
               "ekf_vel_rmse_x,ekf_vel_rmse_y,ekf_vel_rmse_z,"
               "tracking_rmse,ekfui_nees_coverage,ekf_nees_coverage,"
               "saturation_events,stale_sync_events,stream_checksum\n";

    for (const auto& scenario : cfg.scenario_paths) {
        const ScenarioConfig sc = load_scenario(scenario);
        for (const EstimatorChoice feedback : {EstimatorChoice::both, EstimatorChoice::ekf}) {
            const std::string fb_name =
                feedback == EstimatorChoice::both ? "feedback_ekfui" : "feedback_ekf";
            for (int rep = 0; rep < cfg.repetitions; ++rep) {
                RunConfig rc;
                rc.scenario_path = scenario;
                rc.config_path = cfg.config_path;
                rc.estimator = feedback;
                rc.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(rep));
                char sub[16];
                std::snprintf(sub, sizeof(sub), "rep%03d", rep);
                rc.output_dir = cfg.output_dir + "/" + sc.name + "/" + fb_name + "/" + sub;
                const RunResult res = run_scenario(rc);

                const auto& m = res.metrics;
                auto vec_or_nan = [](const std::optional<EstimatorMetrics>& em,
                                     auto field) -> Vec3 {
                    return em ? (em.value().*field) : Vec3::Constant(kNan);
                };
                const Vec3 ui_p = vec_or_nan(m.ekfui, &EstimatorMetrics::pos_rmse);
                const Vec3 ui_v = vec_or_nan(m.ekfui, &EstimatorMetrics::vel_rmse);
                const Vec3 ek_p = vec_or_nan(m.ekf, &EstimatorMetrics::pos_rmse);
                const Vec3 ek_v = vec_or_nan(m.ekf, &EstimatorMetrics::vel_rmse);
                summary << sc.name << ',' << fb_name << ',' << rep << ',' << rc.seed;
                for (const Vec3* v : {&ui_p, &ui_v, &ek_p, &ek_v}) {
                    for (int i = 0; i < 3; ++i) summary << ',' << fmt((*v)(i));
                }
                summary << ',' << fmt(m.tracking_rmse);
                summary << ',' << fmt(m.ekfui ? m.ekfui->nees_coverage : kNan);
                summary << ',' << fmt(m.ekf ? m.ekf->nees_coverage : kNan);
                summary << ',' << m.saturation_events << ',' << m.stale_sync_events << ','
                        << m.stream_checksum << '\n';
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Log re-reading: `metrics` and `plotdata` subcommands.

namespace {

struct CsvTable {
    std::map<std::string, std::string> meta;  // header comment key: value
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    int col(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i] == name) return static_cast<int>(i);
        }
        throw AlignmentError("timeseries.csv: missing column " + name);
    }
};

CsvTable read_timeseries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    CsvTable table;
    std::string line;
    bool have_columns = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto colon = line.find(':');
            if (colon != std::string::npos) {
                std::string key = line.substr(1, colon - 1);
                std::string value = line.substr(colon + 1);
                auto trim = [](std::string& s) {
                    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
                    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.pop_back();
                };
                trim(key);
                trim(value);
                table.meta[key] = value;
            }
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!have_columns) {
            table.columns = cells;
            have_columns = true;
            continue;
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(std::strtod(c.c_str(), nullptr));
        if (row.size() != table.columns.size()) {
            throw AlignmentError(path + ": row width does not match header");
        }
        table.rows.push_back(std::move(row));
    }
    if (!have_columns) throw AlignmentError(path + ": no column header found");
    return table;
}

}  // namespace

RunMetrics recompute_metrics(const std::string& run_dir) {
    const CsvTable t = read_timeseries(run_dir + "/timeseries.csv");

    TruthTrace truth;
    EstimatorTrace ui, ekf;
    const int c_t = t.col("t");
    auto grab3 = [&](const std::vector<double>& row, const char* a, const char* b, const char* c) {
        return Vec3(row[static_cast<std::size_t>(t.col(a))], row[static_cast<std::size_t>(t.col(b))],
                    row[static_cast<std::size_t>(t.col(c))]);
    };

    bool any_ui = false, any_ekf = false;
    for (const auto& row : t.rows) {
        truth.t.push_back(row[static_cast<std::size_t>(c_t)]);
        truth.pos.push_back(grab3(row, "truth_px", "truth_py", "truth_pz"));
        truth.vel.push_back(grab3(row, "truth_vx", "truth_vy", "truth_vz"));
        truth.true_d.push_back(grab3(row, "true_d1", "true_d2", "true_d3"));
        truth.setpoint.push_back(grab3(row, "sp_x", "sp_y", "sp_z"));

        ui.t.push_back(row[static_cast<std::size_t>(c_t)]);
        ui.pos.push_back(grab3(row, "ui_px", "ui_py", "ui_pz"));
        ui.vel.push_back(grab3(row, "ui_vx", "ui_vy", "ui_vz"));
        ui.dhat.push_back(grab3(row, "ui_d1", "ui_d2", "ui_d3"));
        ui.nees.push_back(row[static_cast<std::size_t>(t.col("ui_nees"))]);
        ui.nis.push_back(row[static_cast<std::size_t>(t.col("ui_nis"))]);
        if (ui.pos.back().allFinite()) any_ui = true;

        ekf.t.push_back(row[static_cast<std::size_t>(c_t)]);
        ekf.pos.push_back(grab3(row, "ekf_px", "ekf_py", "ekf_pz"));
        ekf.vel.push_back(grab3(row, "ekf_vx", "ekf_vy", "ekf_vz"));
        ekf.nees.push_back(row[static_cast<std::size_t>(t.col("ekf_nees"))]);
        ekf.nis.push_back(row[static_cast<std::size_t>(t.col("ekf_nis"))]);
        if (ekf.pos.back().allFinite()) any_ekf = true;
    }

    RunMetrics m;
    auto meta_double = [&](const std::string& key, double fallback) {
        auto it = t.meta.find(key);
        return it == t.meta.end() ? fallback : std::strtod(it->second.c_str(), nullptr);
    };
    m.window_start = meta_double("window_start", 0.0);
    m.window_end = meta_double("window_end", truth.t.empty() ? 0.0 : truth.t.back());
    if (!truth.t.empty()) {
        if (any_ui) m.ekfui = compute_estimator_metrics(truth, ui, 9, m.window_start, m.window_end);
        if (any_ekf) m.ekf = compute_estimator_metrics(truth, ekf, 6, m.window_start, m.window_end);
        m.tracking_rmse = compute_tracking_rmse(truth, m.window_start, m.window_end);
    }
    m.saturation_events = static_cast<int>(meta_double("saturation_events", 0.0));
    m.stale_sync_events = static_cast<int>(meta_double("stale_sync_events", 0.0));
    auto it = t.meta.find("stream_checksum");
    if (it != t.meta.end()) m.stream_checksum = std::strtoull(it->second.c_str(), nullptr, 10);
    return m;
}

void emit_plot_data(const std::string& run_dir, const std::string& out_dir) {
    const CsvTable t = read_timeseries(run_dir + "/timeseries.csv");
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    auto copy_columns = [&](const std::string& file, const std::vector<std::string>& names) {
        std::ofstream os(out_dir + "/" + file);
        if (!os) throw std::runtime_error("cannot write " + out_dir + "/" + file);
        for (std::size_t i = 0; i < names.size(); ++i) os << (i ? "," : "") << names[i];
        os << '\n';
        std::vector<int> idx;
        idx.reserve(names.size());
        for (const auto& n : names) idx.push_back(t.col(n));
        for (const auto& row : t.rows) {
            for (std::size_t i = 0; i < idx.size(); ++i) {
                os << (i ? "," : "") << fmt(row[static_cast<std::size_t>(idx[i])]);
            }
            os << '\n';
        }
    };

    // Positions: raw stream vs both estimators (figure-4 layout).
    copy_columns("positions.csv", {"t", "truth_px", "truth_py", "truth_pz", "meas_px", "meas_py",
                                   "meas_pz", "ui_px", "ui_py", "ui_pz", "ekf_px", "ekf_py", "ekf_pz"});
    // Velocities, with a numerically differentiated measurement channel
    // (figure-5 layout).
    {
        std::ofstream os(out_dir + "/velocities.csv");
        if (!os) throw std::runtime_error("cannot write velocities.csv");
        os << "t,truth_vx,truth_vy,truth_vz,meas_diff_vx,meas_diff_vy,meas_diff_vz,"
              "ui_vx,ui_vy,ui_vz,ekf_vx,ekf_vy,ekf_vz\n";
        const int ct = t.col("t");
        const int cf = t.col("meas_fresh");
        const int cm[3] = {t.col("meas_px"), t.col("meas_py"), t.col("meas_pz")};
        const int cv[3] = {t.col("truth_vx"), t.col("truth_vy"), t.col("truth_vz")};
        const int cui[3] = {t.col("ui_vx"), t.col("ui_vy"), t.col("ui_vz")};
        const int cek[3] = {t.col("ekf_vx"), t.col("ekf_vy"), t.col("ekf_vz")};
        double prev_t = 0.0;
        Vec3 prev_m = Vec3::Zero();
        bool have_prev = false;
        for (const auto& row : t.rows) {
            Vec3 diff = Vec3::Constant(kNan);
            if (row[static_cast<std::size_t>(cf)] > 0.5) {
                const Vec3 mp(row[static_cast<std::size_t>(cm[0])], row[static_cast<std::size_t>(cm[1])],
                              row[static_cast<std::size_t>(cm[2])]);
                const double tt = row[static_cast<std::size_t>(ct)];
                if (have_prev && tt > prev_t) diff = (mp - prev_m) / (tt - prev_t);
                prev_m = mp;
                prev_t = tt;
                have_prev = true;
            }
            os << fmt(row[static_cast<std::size_t>(ct)]);
            for (int i = 0; i < 3; ++i) os << ',' << fmt(row[static_cast<std::size_t>(cv[i])]);
            for (int i = 0; i < 3; ++i) os << ',' << fmt(diff(i));
            for (int i = 0; i < 3; ++i) os << ',' << fmt(row[static_cast<std::size_t>(cui[i])]);
            for (int i = 0; i < 3; ++i) os << ',' << fmt(row[static_cast<std::size_t>(cek[i])]);
            os << '\n';
        }
    }
    // Cart longitudinal motion (figure-6 bottom row).
    copy_columns("cart.csv", {"t", "cart_px", "cart_py", "cart_vx", "cart_vy", "cart_yaw"});
    // Trajectory traces with a monotone time index for color mapping.
    {
        std::ofstream os(out_dir + "/trajectory.csv");
        if (!os) throw std::runtime_error("cannot write trajectory.csv");
        os << "idx,t,truth_px,truth_py,ui_px,ui_py,ekf_px,ekf_py\n";
        const int cols[7] = {t.col("t"),     t.col("truth_px"), t.col("truth_py"), t.col("ui_px"),
                             t.col("ui_py"), t.col("ekf_px"),   t.col("ekf_py")};
        long idx = 0;
        for (const auto& row : t.rows) {
            os << idx++;
            for (int c : cols) os << ',' << fmt(row[static_cast<std::size_t>(c)]);
            os << '\n';
        }
    }
}

}  // namespace noninertial
