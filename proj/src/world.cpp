#include "noninertial/world.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace noninertial {

void PlatformMotion::validate() const {
    double prev_end = -1e300;
    for (const auto& seg : schedule) {
        if (!(seg.t_end > seg.t_start)) {
            throw ConfigError("PlatformMotion: segment must have t_end > t_start");
        }
        if (seg.t_start < prev_end) {
            throw ConfigError("PlatformMotion: segments must be time-ordered and non-overlapping");
        }
        if (!seg.accel.allFinite()) {
            throw ConfigError("PlatformMotion: segment acceleration must be finite");
        }
        prev_end = seg.t_end;
    }
    if (final_velocity().norm() > 1e-9) {
        std::ostringstream oss;
        oss << "PlatformMotion: schedule must return velocity to zero, got final velocity ("
            << final_velocity().transpose() << ")";
        throw ConfigError(oss.str());
    }
    if (yaw.duration < 0.0) {
        throw ConfigError("PlatformMotion: yaw ramp duration must be >= 0");
    }
}

Vec3 PlatformMotion::final_velocity() const {
    Vec3 v = Vec3::Zero();
    for (const auto& seg : schedule) {
        v += seg.accel * (seg.t_end - seg.t_start);
    }
    return v;
}

PlatformState platform_state_at(const PlatformMotion& pm, double t) {
    if (!(t >= 0.0)) {
        throw std::invalid_argument("platform_state_at: t must be >= 0");
    }
    PlatformState out;
    double cursor = 0.0;
    Vec3 vel = Vec3::Zero();
    Vec3 pos = Vec3::Zero();

    // Segments are half-open [t_start, t_end): at the exact boundary the
    // new segment's acceleration is already in force.
    for (const auto& seg : pm.schedule) {
        const double coast = std::min(t, seg.t_start) - cursor;
        if (coast > 0.0) {
            pos += vel * coast;
            cursor += coast;
        }
        if (t < seg.t_start) break;

        const double tau = std::min(t, seg.t_end) - seg.t_start;
        pos += vel * tau + 0.5 * seg.accel * tau * tau;
        vel += seg.accel * tau;
        cursor = seg.t_start + tau;
        if (t < seg.t_end) {
            out.accel = seg.accel;
            break;
        }
    }
    if (t > cursor) {
        pos += vel * (t - cursor);
    }
    out.vel = vel;
    out.pos = pos;

    if (pm.yaw.duration > 0.0 && t > pm.yaw.t_start) {
        if (t >= pm.yaw.t_start + pm.yaw.duration) {
            out.yaw = pm.yaw.angle;
        } else {
            const double frac = (t - pm.yaw.t_start) / pm.yaw.duration;
            out.yaw = pm.yaw.angle * frac;
            out.yaw_rate = pm.yaw.angle / pm.yaw.duration;
        }
    } else if (pm.yaw.duration == 0.0 && pm.yaw.angle != 0.0 && t >= pm.yaw.t_start) {
        out.yaw = pm.yaw.angle;
    }
    return out;
}

void WorldBounds::validate() const {
    for (int i = 0; i < 3; ++i) {
        if (!(inner(i) < outer(i))) {
            throw ConfigError("WorldBounds: inner volume must be strictly inside outer");
        }
        if (!(inner(i) > 0.0)) {
            throw ConfigError("WorldBounds: inner dimensions must be positive");
        }
    }
}

bool WorldBounds::inside_inner(const Vec3& p) const {
    return std::abs(p.x()) <= 0.5 * inner.x() && std::abs(p.y()) <= 0.5 * inner.y() &&
           std::abs(p.z()) <= 0.5 * inner.z();
}

uint64_t splitmix64(uint64_t x) {
    uint64_t z = x + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t base, uint64_t k) {
    return splitmix64(base + (k + 1) * 0x9E3779B97F4A7C15ULL);
}

double GaussianSampler::uniform01() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return 1.0 - static_cast<double>(z >> 11) * 0x1.0p-53;  // (0, 1]
}

double GaussianSampler::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925;
    spare_ = r * std::sin(two_pi * u2);
    has_spare_ = true;
    return r * std::cos(two_pi * u2);
}

namespace {
Mat3 rot_z_transpose(double yaw) {
    const double c = std::cos(yaw), s = std::sin(yaw);
    Mat3 R;
    R << c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0;
    return R;
}
}  // namespace

Vec3 relative_position(const Vec3& drone_world_pos, const PlatformState& platform) {
    return rot_z_transpose(platform.yaw) * (drone_world_pos - platform.pos);
}

Vec3 relative_orientation(const Vec3& drone_world_euler, double platform_yaw) {
    return {drone_world_euler.x(), drone_world_euler.y(),
            wrap_angle(drone_world_euler.z() - platform_yaw)};
}

Vec3 relative_velocity(const Vec3& drone_world_pos, const Vec3& drone_world_vel,
                       const PlatformState& platform) {
    const Vec3 dp = drone_world_pos - platform.pos;
    const Vec3 dv = drone_world_vel - platform.vel;
    const Vec3 omega_cross = platform.yaw_rate * Vec3(-dp.y(), dp.x(), 0.0);  // yaw_rate * e3 x dp
    return rot_z_transpose(platform.yaw) * (dv - omega_cross);
}

std::vector<TimedMeasurement> sample_measurements(const FullState& drone_world,
                                                  const PlatformState& platform, double t,
                                                  const NoiseConfig& noise, GaussianSampler& rng) {
    const bool noise_free =
        noise.pos_sigma == 0.0 && noise.ori_sigma == 0.0 && noise.time_jitter_sigma == 0.0;

    TimedMeasurement drone;
    drone.source = StreamSource::drone_stream;
    drone.noise_free = noise_free;
    drone.position = relative_position(drone_world.position(), platform) + rng.next_vec3(noise.pos_sigma);
    const Vec3 rel_ori = relative_orientation(drone_world.angles(), platform.yaw);
    const Vec3 ori_noise = rng.next_vec3(noise.ori_sigma);
    for (int i = 0; i < 3; ++i) {
        drone.orientation(i) = wrap_angle(rel_ori(i) + ori_noise(i));
    }
    drone.timestamp = t + rng.next(noise.time_jitter_sigma);

    TimedMeasurement cart;
    cart.source = StreamSource::platform_stream;
    cart.noise_free = noise_free;
    cart.position = platform.pos + rng.next_vec3(noise.pos_sigma);
    const Vec3 cart_ori_noise = rng.next_vec3(noise.ori_sigma);
    cart.orientation = {wrap_angle(cart_ori_noise.x()), wrap_angle(cart_ori_noise.y()),
                        wrap_angle(platform.yaw + cart_ori_noise.z())};
    cart.timestamp = t + rng.next(noise.time_jitter_sigma);

    return {drone, cart};
}

std::vector<SyncedPair> synchronize(const std::vector<TimedMeasurement>& drone_msmts,
                                    const std::vector<TimedMeasurement>& platform_msmts, double window) {
    if (!(window > 0.0)) {
        throw std::invalid_argument("synchronize: window must be > 0");
    }
    std::vector<SyncedPair> out;
    out.reserve(drone_msmts.size());

    std::size_t j = 0;
    for (const auto& d : drone_msmts) {
        SyncedPair pair;
        pair.drone = d;
        if (!platform_msmts.empty()) {
            // Nearest platform sample; strict improvement keeps ties on the
            // earlier side.
            while (j + 1 < platform_msmts.size() &&
                   std::abs(platform_msmts[j + 1].timestamp - d.timestamp) <
                       std::abs(platform_msmts[j].timestamp - d.timestamp)) {
                ++j;
            }
            const double dt = platform_msmts[j].timestamp - d.timestamp;
            if (std::abs(dt) <= window) {
                pair.platform = platform_msmts[j];
                pair.dt = dt;
            } else {
                pair.stale = true;
            }
        } else {
            pair.stale = true;
        }
        out.push_back(std::move(pair));
    }
    return out;
}

}  // namespace noninertial
