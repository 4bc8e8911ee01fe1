#pragma once

// Simulated platform motion, the two measurement streams, and timestamp
// synchronization. Platform kinematics are integrated analytically from a
// piecewise-constant acceleration schedule, so there is no accumulation
// error; the optional yaw rotation ramps linearly over a configured window
// while the cart is not translating.

#include "noninertial/dynamics.hpp"
#include "noninertial/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace noninertial {

enum class ProfileTag { stationary, x_forward, yawed_xy };

struct AccelSegment {
    double t_start{0.0};
    double t_end{0.0};
    Vec3 accel = Vec3::Zero();  // world frame
};

struct YawSchedule {
    double angle{0.0};     // target yaw, rad
    double t_start{0.0};   // ramp start
    double duration{0.0};  // ramp length; 0 disables
};

struct PlatformMotion {
    ProfileTag profile{ProfileTag::stationary};
    std::vector<AccelSegment> schedule;
    YawSchedule yaw;

    /// Segments must be time-ordered, non-overlapping, and the schedule must
    /// bring the velocity back to zero (carts stop). Throws ConfigError.
    void validate() const;
    Vec3 final_velocity() const;
};

struct PlatformState {
    Vec3 accel = Vec3::Zero();
    Vec3 vel = Vec3::Zero();
    Vec3 pos = Vec3::Zero();
    double yaw{0.0};
    double yaw_rate{0.0};
};

/// Exact kinematics of the schedule at time t >= 0.
PlatformState platform_state_at(const PlatformMotion& pm, double t);

enum class StreamSource { drone_stream, platform_stream };

struct TimedMeasurement {
    double timestamp{0.0};
    StreamSource source{StreamSource::drone_stream};
    Vec3 position = Vec3::Zero();
    Vec3 orientation = Vec3::Zero();  // Euler (phi, theta, psi)
    bool noise_free{false};
};

struct WorldBounds {
    Vec3 outer{1.8, 1.0, 1.0};  // cart dimensions, m
    Vec3 inner{1.7, 0.9, 0.9};  // flight volume dimensions, m

    void validate() const;
    /// Box centered at the platform origin with half-extents inner/2.
    bool inside_inner(const Vec3& p) const;
};

struct NoiseConfig {
    double pos_sigma{1e-3};          // m, per axis
    double ori_sigma{2e-3};          // rad, per axis
    double time_jitter_sigma{2e-3};  // s
};

struct StreamConfig {
    double rate{100.0};  // Hz
    double phase{0.0};   // s
};

// --- deterministic RNG utilities -----------------------------------------

uint64_t splitmix64(uint64_t x);
/// Per-repetition / per-stream seed derivation (documented splitting rule):
/// derive_seed(base, k) = splitmix64(base + (k + 1) * 0x9E3779B97F4A7C15).
uint64_t derive_seed(uint64_t base, uint64_t k);

/// Standard normal draws via Box-Muller over a splitmix64 stream; bit-stable
/// for a given seed independent of the C++ library's distribution internals.
class GaussianSampler {
public:
    explicit GaussianSampler(uint64_t seed) : state_(splitmix64(seed ^ 0x5bf03635'9d5dbe1dULL)) {}
    double next();
    double next(double sigma) { return sigma * next(); }
    Vec3 next_vec3(double sigma) { return {next(sigma), next(sigma), next(sigma)}; }

private:
    double uniform01();  // in (0, 1]
    uint64_t state_;
    bool has_spare_{false};
    double spare_{0.0};
};

// --- frame transforms and spot sampling ----------------------------------

/// Drone position relative to the platform frame: Rz(-yaw) (p_world - p_cart).
Vec3 relative_position(const Vec3& drone_world_pos, const PlatformState& platform);

/// Drone Euler angles relative to a yaw-only platform rotation.
Vec3 relative_orientation(const Vec3& drone_world_euler, double platform_yaw);

/// Exact time derivative of relative_position, including the frame-rotation
/// term while the platform yaw is ramping.
Vec3 relative_velocity(const Vec3& drone_world_pos, const Vec3& drone_world_vel,
                       const PlatformState& platform);

/// One sample of each stream at time t: drone pose relative to the platform
/// (what the cart-mounted system sees) and cart pose in the world frame.
/// Draw order is fixed: drone pos xyz, drone ori xyz, drone timestamp jitter,
/// platform pos xyz, platform ori xyz, platform timestamp jitter.
std::vector<TimedMeasurement> sample_measurements(const FullState& drone_world,
                                                  const PlatformState& platform, double t,
                                                  const NoiseConfig& noise, GaussianSampler& rng);

// --- synchronization -------------------------------------------------------

struct SyncedPair {
    TimedMeasurement drone;
    std::optional<TimedMeasurement> platform;  // empty when stale
    double dt{0.0};                            // platform.timestamp - drone.timestamp
    bool stale{false};
};

/// For each drone measurement, attach the nearest-in-time platform
/// measurement when |dt| <= window, ties broken toward the earlier sample;
/// otherwise the pair is marked stale.
std::vector<SyncedPair> synchronize(const std::vector<TimedMeasurement>& drone_msmts,
                                    const std::vector<TimedMeasurement>& platform_msmts, double window);

}  // namespace noninertial
