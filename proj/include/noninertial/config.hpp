#pragma once

// Plain key = value configuration files ('#' comments), shared by the vehicle
// config and the scenario files. Repeated `segment = t0 t1 ax ay az` lines
// form the platform acceleration schedule table.

#include "noninertial/actuation.hpp"
#include "noninertial/controller.hpp"
#include "noninertial/dynamics.hpp"
#include "noninertial/estimators.hpp"
#include "noninertial/world.hpp"

#include <map>
#include <string>
#include <vector>

namespace noninertial {

class KeyValueFile {
public:
    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key) const;  // whitespace-separated

    const std::vector<std::vector<double>>& segments() const { return segments_; }
    const std::string& origin() const { return origin_; }

private:
    std::map<std::string, std::string> values_;
    std::vector<std::vector<double>> segments_;
    std::string origin_;
};

/// Vehicle + filter + controller configuration (config/defaults.cfg).
struct AppConfig {
    InertiaParams params;
    FilterConfig filter;
    AttitudeFilterConfig attitude_filter;
    ControllerGains gains;
    double dt_sim{0.002};
    std::string thrust_curve_file;
    bool use_true_attitude{false};  // ablation: feed ground-truth attitude to the filters
};

AppConfig load_app_config(const std::string& path);

struct ScenarioConfig {
    int schema_version{1};
    std::string name;
    PlatformMotion motion;
    double duration{20.0};
    double hover_altitude{0.35};
    double takeoff_ramp{2.0};
    double landing_ramp{2.0};
    double metrics_margin{3.0};  // transient seconds excluded at both ends
    NoiseConfig noise;
    StreamConfig drone_stream;
    StreamConfig platform_stream;
    double sync_window{0.1};
    WorldBounds bounds;
};

ScenarioConfig load_scenario(const std::string& path);

/// Two-column (pwm_duty, thrust_newtons) text file, '#' comments, optional
/// `interp = linear|cubic` directive line.
ThrustCurve load_thrust_curve(const std::string& path);

}  // namespace noninertial
