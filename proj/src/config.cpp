#include "noninertial/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace noninertial {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<double> parse_doubles(const std::string& text, const std::string& context) {
    std::vector<double> out;
    std::istringstream iss(text);
    double v;
    while (iss >> v) out.push_back(v);
    std::string rest;
    if (iss.fail() && !iss.eof() && (iss.clear(), iss >> rest, !rest.empty())) {
        throw ConfigError(context + ": cannot parse '" + text + "' as numbers");
    }
    return out;
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

KeyValueFile KeyValueFile::parse_string(const std::string& text, const std::string& origin) {
    KeyValueFile kv;
    kv.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            std::ostringstream oss;
            oss << origin << ":" << lineno << ": expected 'key = value', got '" << line << "'";
            throw ConfigError(oss.str());
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            std::ostringstream oss;
            oss << origin << ":" << lineno << ": empty key";
            throw ConfigError(oss.str());
        }
        if (key == "segment") {
            auto nums = parse_doubles(value, origin);
            if (nums.size() != 5) {
                std::ostringstream oss;
                oss << origin << ":" << lineno << ": segment needs 5 numbers (t0 t1 ax ay az)";
                throw ConfigError(oss.str());
            }
            kv.segments_.push_back(std::move(nums));
        } else {
            kv.values_[key] = value;
        }
    }
    return kv;
}

bool KeyValueFile::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValueFile::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw ConfigError(origin_ + ": missing required key '" + key + "'");
    }
    return it->second;
}

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueFile::get_double(const std::string& key) const {
    const std::string s = get_string(key);
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ": key '" + key + "' is not a number: '" + s + "'");
    }
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

long KeyValueFile::get_int(const std::string& key, long fallback) const {
    if (!has(key)) return fallback;
    const std::string s = get_string(key);
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ": key '" + key + "' is not an integer: '" + s + "'");
    }
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    std::string s = get_string(key);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(origin_ + ": key '" + key + "' is not a boolean: '" + s + "'");
}

std::vector<double> KeyValueFile::get_doubles(const std::string& key) const {
    return parse_doubles(get_string(key), origin_ + ": key '" + key + "'");
}

namespace {

template <int N>
Eigen::Matrix<double, N, N> diag_from(const KeyValueFile& kv, const std::string& key) {
    const auto vals = kv.get_doubles(key);
    if (vals.size() != N) {
        std::ostringstream oss;
        oss << kv.origin() << ": key '" << key << "' needs " << N << " diagonal entries, got "
            << vals.size();
        throw ConfigError(oss.str());
    }
    Eigen::Matrix<double, N, N> m = Eigen::Matrix<double, N, N>::Zero();
    for (int i = 0; i < N; ++i) m(i, i) = vals[static_cast<std::size_t>(i)];
    return m;
}

PidGains pid_from(const KeyValueFile& kv, const std::string& prefix) {
    PidGains g;
    g.kP = kv.get_double(prefix + ".kp");
    g.kI = kv.get_double(prefix + ".ki", 0.0);
    g.kD = kv.get_double(prefix + ".kd", 0.0);
    g.deriv_tau = kv.get_double(prefix + ".deriv_tau", 0.05);
    g.integ_limit = kv.get_double(prefix + ".integ_limit", 1e9);
    return g;
}

std::string sibling_path(const std::string& base, const std::string& rel) {
    if (rel.empty() || rel.front() == '/') return rel;
    const auto slash = base.find_last_of('/');
    if (slash == std::string::npos) return rel;
    return base.substr(0, slash + 1) + rel;
}

}  // namespace

AppConfig load_app_config(const std::string& path) {
    const KeyValueFile kv = KeyValueFile::parse_file(path);
    AppConfig cfg;

    cfg.params.mass = kv.get_double("vehicle.mass");
    cfg.params.Ix = kv.get_double("vehicle.ix");
    cfg.params.Iy = kv.get_double("vehicle.iy");
    cfg.params.Iz = kv.get_double("vehicle.iz");
    cfg.params.g = kv.get_double("vehicle.g", 9.81);
    cfg.params.arm_length = kv.get_double("vehicle.arm_length", 0.046);
    cfg.params.thrust_coeff = kv.get_double("vehicle.thrust_coeff", 2.0e-8);
    cfg.params.yaw_coeff = kv.get_double("vehicle.yaw_coeff", 5.0e-10);
    cfg.params.validate();

    cfg.filter.Q_core = diag_from<6>(kv, "filter.q_core_diag");
    cfg.filter.Q_d = diag_from<3>(kv, "filter.q_d_diag");
    cfg.filter.R = diag_from<3>(kv, "filter.r_diag");
    cfg.filter.P0 = diag_from<9>(kv, "filter.p0_diag");
    cfg.filter.Ts = kv.get_double("filter.ts", 0.01);
    cfg.filter.epsilon_fd = kv.get_double("filter.epsilon_fd", 1e-6);
    cfg.filter.joseph_update = kv.get_bool("filter.joseph_update", false);
    cfg.filter.gravity = cfg.params.g;
    cfg.filter.validate();

    cfg.attitude_filter.Q = diag_from<6>(kv, "attitude_filter.q_diag");
    cfg.attitude_filter.R = diag_from<3>(kv, "attitude_filter.r_diag");
    cfg.attitude_filter.P0 = diag_from<6>(kv, "attitude_filter.p0_diag");
    cfg.attitude_filter.Ts = cfg.filter.Ts;
    cfg.attitude_filter.epsilon_fd = cfg.filter.epsilon_fd;

    cfg.gains.kPxy = kv.get_double("controller.kpxy");
    cfg.gains.kPz = kv.get_double("controller.kpz");
    cfg.gains.vel_x = pid_from(kv, "controller.vel_x");
    cfg.gains.vel_y = pid_from(kv, "controller.vel_y");
    cfg.gains.vel_z = pid_from(kv, "controller.vel_z");
    cfg.gains.attitude_rate_limit = kv.get_double("controller.attitude_rate_limit", 2.0);
    cfg.gains.attitude_saturation = kv.get_double("controller.attitude_saturation", 0.35);
    cfg.gains.att_kP = kv.get_double("controller.att_kp", 250.0);
    cfg.gains.att_kD = kv.get_double("controller.att_kd", 30.0);
    cfg.gains.yaw_damping = kv.get_double("controller.yaw_damping", 10.0);
    cfg.gains.moment_limit = kv.get_double("controller.moment_limit", 100.0);
    cfg.gains.validate();

    cfg.dt_sim = kv.get_double("sim.dt", 0.002);
    cfg.use_true_attitude = kv.get_bool("sim.use_true_attitude", false);
    cfg.thrust_curve_file = sibling_path(path, kv.get_string("vehicle.thrust_curve_file"));
    return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
    const KeyValueFile kv = KeyValueFile::parse_file(path);
    ScenarioConfig sc;

    sc.schema_version = static_cast<int>(kv.get_int("schema_version", 1));
    if (sc.schema_version != 1) {
        throw ConfigError(path + ": unsupported scenario schema_version");
    }
    sc.name = kv.get_string("name");

    const std::string profile = kv.get_string("profile");
    if (profile == "stationary") {
        sc.motion.profile = ProfileTag::stationary;
    } else if (profile == "x_forward") {
        sc.motion.profile = ProfileTag::x_forward;
    } else if (profile == "yawed_xy") {
        sc.motion.profile = ProfileTag::yawed_xy;
    } else {
        throw ConfigError(path + ": unknown profile '" + profile + "'");
    }

    for (const auto& seg : kv.segments()) {
        sc.motion.schedule.push_back({seg[0], seg[1], Vec3(seg[2], seg[3], seg[4])});
    }
    sc.motion.yaw.angle = kv.get_double("yaw.angle", 0.0);
    sc.motion.yaw.t_start = kv.get_double("yaw.t_start", 0.0);
    sc.motion.yaw.duration = kv.get_double("yaw.duration", 0.0);
    sc.motion.validate();

    sc.duration = kv.get_double("duration");
    sc.hover_altitude = kv.get_double("hover_altitude", 0.35);
    sc.takeoff_ramp = kv.get_double("takeoff_ramp", 2.0);
    sc.landing_ramp = kv.get_double("landing_ramp", 2.0);
    sc.metrics_margin = kv.get_double("metrics_margin", 3.0);
    if (!(sc.duration > 0.0)) {
        throw ConfigError(path + ": duration must be > 0");
    }

    sc.noise.pos_sigma = kv.get_double("noise.pos_sigma", 1e-3);
    sc.noise.ori_sigma = kv.get_double("noise.ori_sigma", 2e-3);
    sc.noise.time_jitter_sigma = kv.get_double("noise.time_jitter_sigma", 2e-3);

    sc.drone_stream.rate = kv.get_double("stream.drone.rate", 100.0);
    sc.drone_stream.phase = kv.get_double("stream.drone.phase", 0.0);
    sc.platform_stream.rate = kv.get_double("stream.platform.rate", 100.0);
    sc.platform_stream.phase = kv.get_double("stream.platform.phase", 0.0);
    if (!(sc.drone_stream.rate > 0.0) || !(sc.platform_stream.rate > 0.0)) {
        throw ConfigError(path + ": stream rates must be > 0");
    }

    sc.sync_window = kv.get_double("sync.window", 0.1);
    if (!(sc.sync_window > 0.0)) {
        throw ConfigError(path + ": sync.window must be > 0");
    }

    if (kv.has("bounds.outer")) {
        const auto v = kv.get_doubles("bounds.outer");
        if (v.size() != 3) throw ConfigError(path + ": bounds.outer needs 3 numbers");
        sc.bounds.outer = Vec3(v[0], v[1], v[2]);
    }
    if (kv.has("bounds.inner")) {
        const auto v = kv.get_doubles("bounds.inner");
        if (v.size() != 3) throw ConfigError(path + ": bounds.inner needs 3 numbers");
        sc.bounds.inner = Vec3(v[0], v[1], v[2]);
    }
    sc.bounds.validate();
    return sc;
}

ThrustCurve load_thrust_curve(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open thrust curve file: " + path);
    }
    std::vector<std::pair<double, double>> samples;
    CurveInterp mode = CurveInterp::MonotoneCubic;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.find("interp") == 0) {
            const auto eq = line.find('=');
            const std::string v = eq == std::string::npos ? "" : trim(line.substr(eq + 1));
            if (v == "linear") {
                mode = CurveInterp::Linear;
            } else if (v == "cubic") {
                mode = CurveInterp::MonotoneCubic;
            } else {
                throw ConfigError(path + ": interp must be 'linear' or 'cubic'");
            }
            continue;
        }
        std::istringstream iss(line);
        double pwm, thrust;
        if (!(iss >> pwm >> thrust)) {
            std::ostringstream oss;
            oss << path << ":" << lineno << ": expected 'pwm thrust', got '" << line << "'";
            throw ConfigError(oss.str());
        }
        samples.emplace_back(pwm, thrust);
    }
    return ThrustCurve(std::move(samples), mode);
}

}  // namespace noninertial
