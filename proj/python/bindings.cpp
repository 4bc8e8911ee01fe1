// Python bindings for the core operations: dynamics, actuation, estimators,
// controller, world and the scenario harness.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "noninertial/config.hpp"
#include "noninertial/controller.hpp"
#include "noninertial/harness.hpp"
#include "noninertial/metrics.hpp"

namespace py = pybind11;
using namespace noninertial;

namespace {

Eigen::MatrixXd stack3(const std::vector<Vec3>& rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), 3);
    for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i) = rows[static_cast<std::size_t>(i)];
    return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Quadrotor-on-a-moving-platform simulation and estimation workbench";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<SaturationError>(m, "SaturationError");
    py::register_exception<IntegrationError>(m, "IntegrationError");
    py::register_exception<FilterError>(m, "FilterError");

    // --- dynamics ---------------------------------------------------------
    py::class_<FullState>(m, "FullState")
        .def(py::init<>())
        .def_readwrite("x", &FullState::x)
        .def_readwrite("vx", &FullState::vx)
        .def_readwrite("y", &FullState::y)
        .def_readwrite("vy", &FullState::vy)
        .def_readwrite("z", &FullState::z)
        .def_readwrite("vz", &FullState::vz)
        .def_readwrite("phi", &FullState::phi)
        .def_readwrite("phi_dot", &FullState::phi_dot)
        .def_readwrite("theta", &FullState::theta)
        .def_readwrite("theta_dot", &FullState::theta_dot)
        .def_readwrite("psi", &FullState::psi)
        .def_readwrite("psi_dot", &FullState::psi_dot)
        .def("vector", &FullState::vector)
        .def_static("from_vector", &FullState::from_vector);

    py::class_<InertiaParams>(m, "InertiaParams")
        .def(py::init<>())
        .def_readwrite("mass", &InertiaParams::mass)
        .def_readwrite("Ix", &InertiaParams::Ix)
        .def_readwrite("Iy", &InertiaParams::Iy)
        .def_readwrite("Iz", &InertiaParams::Iz)
        .def_readwrite("g", &InertiaParams::g)
        .def_readwrite("arm_length", &InertiaParams::arm_length)
        .def_readwrite("thrust_coeff", &InertiaParams::thrust_coeff)
        .def_readwrite("yaw_coeff", &InertiaParams::yaw_coeff)
        .def("validate", &InertiaParams::validate);

    py::class_<PlatformAcceleration>(m, "PlatformAcceleration")
        .def(py::init<double, double, double>(), py::arg("ax") = 0.0, py::arg("ay") = 0.0,
             py::arg("az") = 0.0)
        .def_readwrite("ax", &PlatformAcceleration::ax)
        .def_readwrite("ay", &PlatformAcceleration::ay)
        .def_readwrite("az", &PlatformAcceleration::az)
        .def("vec", &PlatformAcceleration::vec);

    m.def("coupling_matrix", &coupling_matrix);
    m.def("thrust_gravity_accel", &thrust_gravity_accel, py::arg("u1"), py::arg("phi"),
          py::arg("theta"), py::arg("psi"), py::arg("g"));
    m.def("inertial_derivative",
          py::overload_cast<const FullState&, const ControlInput&, const InertiaParams&>(
              &inertial_derivative));
    m.def("relative_acceleration", &relative_acceleration);
    m.def("noninertial_derivative",
          py::overload_cast<const FullState&, const ControlInput&, const PlatformAcceleration&,
                            const InertiaParams&>(&noninertial_derivative));
    m.def("integrate_step", &integrate_step, py::arg("state"), py::arg("derivative"), py::arg("dt"));
    m.def("wrap_angle", &wrap_angle);

    // --- actuation --------------------------------------------------------
    py::class_<ControlInput>(m, "ControlInput")
        .def(py::init<double, double, double, double>(), py::arg("u1") = 0.0, py::arg("u2") = 0.0,
             py::arg("u3") = 0.0, py::arg("u4") = 0.0)
        .def_readwrite("u1", &ControlInput::u1)
        .def_readwrite("u2", &ControlInput::u2)
        .def_readwrite("u3", &ControlInput::u3)
        .def_readwrite("u4", &ControlInput::u4)
        .def("vec", &ControlInput::vec);

    py::class_<RotorSpeeds>(m, "RotorSpeeds")
        .def(py::init<>())
        .def_readwrite("omega", &RotorSpeeds::omega);

    py::enum_<CurveInterp>(m, "CurveInterp")
        .value("Linear", CurveInterp::Linear)
        .value("MonotoneCubic", CurveInterp::MonotoneCubic);

    py::class_<ThrustCurve>(m, "ThrustCurve")
        .def(py::init<std::vector<std::pair<double, double>>, CurveInterp>(), py::arg("samples"),
             py::arg("mode") = CurveInterp::MonotoneCubic)
        .def("pwm_to_thrust", &ThrustCurve::pwm_to_thrust)
        .def("thrust_to_pwm", &ThrustCurve::thrust_to_pwm)
        .def("max_thrust", &ThrustCurve::max_thrust)
        .def("samples", &ThrustCurve::samples);

    m.def("mixing_matrix", &mixing_matrix);
    m.def("mix_forward", &mix_forward);
    m.def("mix_inverse", &mix_inverse);

    // --- estimators ---------------------------------------------------------
    py::class_<ExtendedState>(m, "ExtendedState")
        .def(py::init<>())
        .def_readwrite("px", &ExtendedState::px)
        .def_readwrite("vx", &ExtendedState::vx)
        .def_readwrite("py", &ExtendedState::py)
        .def_readwrite("vy", &ExtendedState::vy)
        .def_readwrite("pz", &ExtendedState::pz)
        .def_readwrite("vz", &ExtendedState::vz)
        .def_readwrite("d1", &ExtendedState::d1)
        .def_readwrite("d2", &ExtendedState::d2)
        .def_readwrite("d3", &ExtendedState::d3)
        .def("vector", &ExtendedState::vector)
        .def_static("from_vector", &ExtendedState::from_vector);

    py::class_<FilterConfig>(m, "FilterConfig")
        .def(py::init<>())
        .def_readwrite("Q_core", &FilterConfig::Q_core)
        .def_readwrite("Q_d", &FilterConfig::Q_d)
        .def_readwrite("R", &FilterConfig::R)
        .def_readwrite("P0", &FilterConfig::P0)
        .def_readwrite("Ts", &FilterConfig::Ts)
        .def_readwrite("epsilon_fd", &FilterConfig::epsilon_fd)
        .def_readwrite("gravity", &FilterConfig::gravity)
        .def_readwrite("joseph_update", &FilterConfig::joseph_update)
        .def("Q_aug", &FilterConfig::Q_aug)
        .def("validate", &FilterConfig::validate);

    py::class_<FilterState>(m, "FilterState")
        .def(py::init<>())
        .def_readwrite("estimate", &FilterState::estimate)
        .def_readwrite("covariance", &FilterState::covariance)
        .def_readonly("last_update_time", &FilterState::last_update_time);

    py::class_<BaselineState>(m, "BaselineState")
        .def(py::init<>())
        .def_readwrite("state", &BaselineState::state)
        .def_readwrite("covariance", &BaselineState::covariance);

    py::class_<AttitudeState>(m, "AttitudeState")
        .def(py::init<>())
        .def_readwrite("phi", &AttitudeState::phi)
        .def_readwrite("phi_dot", &AttitudeState::phi_dot)
        .def_readwrite("theta", &AttitudeState::theta)
        .def_readwrite("theta_dot", &AttitudeState::theta_dot)
        .def_readwrite("psi", &AttitudeState::psi)
        .def_readwrite("psi_dot", &AttitudeState::psi_dot)
        .def_readwrite("covariance", &AttitudeState::covariance)
        .def("vector", &AttitudeState::vector);

    py::class_<AttitudeFilterConfig>(m, "AttitudeFilterConfig")
        .def(py::init<>())
        .def_readwrite("Q", &AttitudeFilterConfig::Q)
        .def_readwrite("R", &AttitudeFilterConfig::R)
        .def_readwrite("P0", &AttitudeFilterConfig::P0)
        .def_readwrite("Ts", &AttitudeFilterConfig::Ts)
        .def_readwrite("epsilon_fd", &AttitudeFilterConfig::epsilon_fd);

    py::class_<InnovationRecord>(m, "InnovationRecord")
        .def_readonly("time", &InnovationRecord::time)
        .def_readonly("innovation", &InnovationRecord::innovation)
        .def_readonly("S", &InnovationRecord::S)
        .def_readonly("nis", &InnovationRecord::nis);

    m.def("fd_jacobian", &fd_jacobian, py::arg("f"), py::arg("z_hat"), py::arg("epsilon"));
    m.def("ekfui_predict_map", &ekfui_predict_map);
    m.def("baseline_predict_map", &baseline_predict_map);
    m.def("ekfui_predict", &ekfui_predict);
    m.def("ekfui_update", [](const FilterState& fs, const Vec3& y, const FilterConfig& cfg,
                             double time) {
        const auto r = ekfui_update(fs, y, cfg, time);
        return py::make_tuple(r.state, r.innovation);
    });
    m.def("ekfui_step", [](const FilterState& fs, const ControlInput& u, const AttitudeState& att,
                           const std::optional<Vec3>& y, const FilterConfig& cfg, double time) {
        const auto r = ekfui_step(fs, u, att, y, cfg, time);
        return py::make_tuple(r.state, r.innovation);
    });
    m.def("ekf_baseline_step",
          [](const BaselineState& fs, const ControlInput& u, const AttitudeState& att,
             const std::optional<Vec3>& y, const FilterConfig& cfg, double time) {
              const auto r = ekf_baseline_step(fs, u, att, y, cfg, time);
              return py::make_tuple(r.state, r.innovation);
          });
    m.def("attitude_ekf_step", &attitude_ekf_step);
    m.def("init_filter", &init_filter);
    m.def("init_baseline", &init_baseline);
    m.def("init_attitude", &init_attitude);

    // --- controller ---------------------------------------------------------
    py::class_<PidGains>(m, "PidGains")
        .def(py::init<>())
        .def_readwrite("kP", &PidGains::kP)
        .def_readwrite("kI", &PidGains::kI)
        .def_readwrite("kD", &PidGains::kD)
        .def_readwrite("deriv_tau", &PidGains::deriv_tau)
        .def_readwrite("integ_limit", &PidGains::integ_limit);

    py::class_<PidState>(m, "PidState").def(py::init<>());
    m.def("pid_step", &pid_step);

    py::class_<ControllerGains>(m, "ControllerGains")
        .def(py::init<>())
        .def_readwrite("kPxy", &ControllerGains::kPxy)
        .def_readwrite("kPz", &ControllerGains::kPz)
        .def_readwrite("vel_x", &ControllerGains::vel_x)
        .def_readwrite("vel_y", &ControllerGains::vel_y)
        .def_readwrite("vel_z", &ControllerGains::vel_z)
        .def_readwrite("attitude_rate_limit", &ControllerGains::attitude_rate_limit)
        .def_readwrite("attitude_saturation", &ControllerGains::attitude_saturation);

    py::class_<Setpoint>(m, "Setpoint")
        .def(py::init<>())
        .def_readwrite("xd", &Setpoint::xd)
        .def_readwrite("yd", &Setpoint::yd)
        .def_readwrite("zd", &Setpoint::zd)
        .def_readwrite("yaw_d", &Setpoint::yaw_d);

    py::class_<CascadeController>(m, "CascadeController")
        .def(py::init<ControllerGains, double, double>(), py::arg("gains"), py::arg("mass"),
             py::arg("gravity"))
        .def("horizontal_control", &CascadeController::horizontal_control)
        .def("vertical_control", &CascadeController::vertical_control)
        .def("attitude_loop", &CascadeController::attitude_loop)
        .def("faulted", &CascadeController::faulted)
        .def("saturation_events", &CascadeController::saturation_events)
        .def("reset", &CascadeController::reset);

    // --- world --------------------------------------------------------------
    py::enum_<ProfileTag>(m, "ProfileTag")
        .value("stationary", ProfileTag::stationary)
        .value("x_forward", ProfileTag::x_forward)
        .value("yawed_xy", ProfileTag::yawed_xy);

    py::class_<AccelSegment>(m, "AccelSegment")
        .def(py::init<double, double, Vec3>(), py::arg("t_start"), py::arg("t_end"),
             py::arg("accel"))
        .def_readwrite("t_start", &AccelSegment::t_start)
        .def_readwrite("t_end", &AccelSegment::t_end)
        .def_readwrite("accel", &AccelSegment::accel);

    py::class_<YawSchedule>(m, "YawSchedule")
        .def(py::init<>())
        .def_readwrite("angle", &YawSchedule::angle)
        .def_readwrite("t_start", &YawSchedule::t_start)
        .def_readwrite("duration", &YawSchedule::duration);

    py::class_<PlatformMotion>(m, "PlatformMotion")
        .def(py::init<>())
        .def_readwrite("profile", &PlatformMotion::profile)
        .def_readwrite("schedule", &PlatformMotion::schedule)
        .def_readwrite("yaw", &PlatformMotion::yaw)
        .def("validate", &PlatformMotion::validate);

    py::class_<PlatformState>(m, "PlatformState")
        .def_readonly("accel", &PlatformState::accel)
        .def_readonly("vel", &PlatformState::vel)
        .def_readonly("pos", &PlatformState::pos)
        .def_readonly("yaw", &PlatformState::yaw)
        .def_readonly("yaw_rate", &PlatformState::yaw_rate);

    m.def("platform_state_at", &platform_state_at);

    py::enum_<StreamSource>(m, "StreamSource")
        .value("drone_stream", StreamSource::drone_stream)
        .value("platform_stream", StreamSource::platform_stream);

    py::class_<TimedMeasurement>(m, "TimedMeasurement")
        .def(py::init<>())
        .def_readwrite("timestamp", &TimedMeasurement::timestamp)
        .def_readwrite("source", &TimedMeasurement::source)
        .def_readwrite("position", &TimedMeasurement::position)
        .def_readwrite("orientation", &TimedMeasurement::orientation)
        .def_readwrite("noise_free", &TimedMeasurement::noise_free);

    py::class_<NoiseConfig>(m, "NoiseConfig")
        .def(py::init<>())
        .def_readwrite("pos_sigma", &NoiseConfig::pos_sigma)
        .def_readwrite("ori_sigma", &NoiseConfig::ori_sigma)
        .def_readwrite("time_jitter_sigma", &NoiseConfig::time_jitter_sigma);

    py::class_<GaussianSampler>(m, "GaussianSampler")
        .def(py::init<std::uint64_t>())
        .def("next", py::overload_cast<>(&GaussianSampler::next))
        .def("next_vec3", &GaussianSampler::next_vec3);

    py::class_<SyncedPair>(m, "SyncedPair")
        .def_readonly("drone", &SyncedPair::drone)
        .def_readonly("platform", &SyncedPair::platform)
        .def_readonly("dt", &SyncedPair::dt)
        .def_readonly("stale", &SyncedPair::stale);

    m.def("sample_measurements", &sample_measurements);
    m.def("synchronize", &synchronize, py::arg("drone_msmts"), py::arg("platform_msmts"),
          py::arg("window"));
    m.def("relative_position", &relative_position);
    m.def("relative_orientation", &relative_orientation);
    m.def("relative_velocity", &relative_velocity);
    m.def("splitmix64", &splitmix64);
    m.def("derive_seed", &derive_seed);

    // --- metrics & harness ---------------------------------------------------
    m.def("chi2_cdf", &chi2_cdf);
    m.def("chi2_quantile", &chi2_quantile);
    m.def("chi2_central_interval", &chi2_central_interval);

    py::class_<EstimatorMetrics>(m, "EstimatorMetrics")
        .def_readonly("pos_rmse", &EstimatorMetrics::pos_rmse)
        .def_readonly("vel_rmse", &EstimatorMetrics::vel_rmse)
        .def_readonly("dhat_rmse", &EstimatorMetrics::dhat_rmse)
        .def_readonly("vel_total_variation", &EstimatorMetrics::vel_total_variation)
        .def_readonly("nees_mean", &EstimatorMetrics::nees_mean)
        .def_readonly("nees_coverage", &EstimatorMetrics::nees_coverage)
        .def_readonly("has_dhat", &EstimatorMetrics::has_dhat)
        .def_readonly("samples", &EstimatorMetrics::samples);

    py::class_<RunMetrics>(m, "RunMetrics")
        .def_readonly("ekfui", &RunMetrics::ekfui)
        .def_readonly("ekf", &RunMetrics::ekf)
        .def_readonly("tracking_rmse", &RunMetrics::tracking_rmse)
        .def_readonly("saturation_events", &RunMetrics::saturation_events)
        .def_readonly("stale_sync_events", &RunMetrics::stale_sync_events)
        .def_readonly("stream_checksum", &RunMetrics::stream_checksum)
        .def_readonly("window_start", &RunMetrics::window_start)
        .def_readonly("window_end", &RunMetrics::window_end);

    py::enum_<EstimatorChoice>(m, "EstimatorChoice")
        .value("ekf", EstimatorChoice::ekf)
        .value("ekfui", EstimatorChoice::ekfui)
        .value("both", EstimatorChoice::both);

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_readwrite("scenario_path", &RunConfig::scenario_path)
        .def_readwrite("config_path", &RunConfig::config_path)
        .def_readwrite("estimator", &RunConfig::estimator)
        .def_readwrite("seed", &RunConfig::seed)
        .def_readwrite("dt_sim", &RunConfig::dt_sim)
        .def_readwrite("duration", &RunConfig::duration)
        .def_readwrite("output_dir", &RunConfig::output_dir)
        .def_readwrite("repetitions", &RunConfig::repetitions);

    py::class_<TruthTrace>(m, "TruthTrace")
        .def_readonly("t", &TruthTrace::t)
        .def_property_readonly("pos", [](const TruthTrace& t) { return stack3(t.pos); })
        .def_property_readonly("vel", [](const TruthTrace& t) { return stack3(t.vel); })
        .def_property_readonly("true_d", [](const TruthTrace& t) { return stack3(t.true_d); })
        .def_property_readonly("setpoint", [](const TruthTrace& t) { return stack3(t.setpoint); });

    py::class_<EstimatorTrace>(m, "EstimatorTrace")
        .def_readonly("t", &EstimatorTrace::t)
        .def_property_readonly("pos", [](const EstimatorTrace& t) { return stack3(t.pos); })
        .def_property_readonly("vel", [](const EstimatorTrace& t) { return stack3(t.vel); })
        .def_property_readonly("dhat", [](const EstimatorTrace& t) { return stack3(t.dhat); })
        .def_readonly("nees", &EstimatorTrace::nees)
        .def_readonly("nis", &EstimatorTrace::nis);

    py::class_<RunEvent>(m, "RunEvent")
        .def_readonly("time", &RunEvent::time)
        .def_readonly("type", &RunEvent::type)
        .def_readonly("detail", &RunEvent::detail);

    py::class_<RunResult>(m, "RunResult")
        .def_readonly("metrics", &RunResult::metrics)
        .def_readonly("run_dir", &RunResult::run_dir)
        .def_readonly("events", &RunResult::events)
        .def_readonly("truth", &RunResult::truth)
        .def_readonly("ekfui_trace", &RunResult::ekfui_trace)
        .def_readonly("ekf_trace", &RunResult::ekf_trace)
        .def_property_readonly("dhat_sigma",
                               [](const RunResult& r) { return stack3(r.dhat_sigma); });

    py::class_<SuiteConfig>(m, "SuiteConfig")
        .def(py::init<>())
        .def_readwrite("scenario_paths", &SuiteConfig::scenario_paths)
        .def_readwrite("config_path", &SuiteConfig::config_path)
        .def_readwrite("seed", &SuiteConfig::seed)
        .def_readwrite("repetitions", &SuiteConfig::repetitions)
        .def_readwrite("output_dir", &SuiteConfig::output_dir);

    m.def("run_scenario", &run_scenario, py::call_guard<py::gil_scoped_release>());
    m.def("run_repetitions", &run_repetitions, py::call_guard<py::gil_scoped_release>());
    m.def("run_suite", &run_suite, py::call_guard<py::gil_scoped_release>());
    m.def("recompute_metrics", &recompute_metrics);
    m.def("emit_plot_data", &emit_plot_data);

    // --- config ---------------------------------------------------------------
    py::class_<AppConfig>(m, "AppConfig")
        .def_readonly("params", &AppConfig::params)
        .def_readonly("filter", &AppConfig::filter)
        .def_readonly("attitude_filter", &AppConfig::attitude_filter)
        .def_readonly("gains", &AppConfig::gains)
        .def_readonly("dt_sim", &AppConfig::dt_sim)
        .def_readonly("thrust_curve_file", &AppConfig::thrust_curve_file);

    py::class_<ScenarioConfig>(m, "ScenarioConfig")
        .def_readonly("name", &ScenarioConfig::name)
        .def_readonly("motion", &ScenarioConfig::motion)
        .def_readonly("duration", &ScenarioConfig::duration)
        .def_readonly("hover_altitude", &ScenarioConfig::hover_altitude)
        .def_readonly("noise", &ScenarioConfig::noise)
        .def_readonly("sync_window", &ScenarioConfig::sync_window);

    m.def("load_app_config", &load_app_config);
    m.def("load_scenario", &load_scenario);
    m.def("load_thrust_curve", &load_thrust_curve);
}
