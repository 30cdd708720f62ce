#pragma once

#include "sxr/filters.hpp"
#include "sxr/session.hpp"
#include "sxr/tensor.hpp"

#include <array>
#include <optional>
#include <span>

namespace sxr {

inline constexpr int kImuWindowLen = 200; // 1 s of IMU at 200 Hz
inline constexpr int kHandWindowLen = 60; // 1 s of hand tracking at 60 Hz
inline constexpr int kImuChannels = 6;    // ax ay az gx gy gz
inline constexpr int kImuComponents = 4;  // low band, mid band, high band, original
inline constexpr int kHandFeatures = 8;   // 4 joint positions + 4 joint accelerations
inline constexpr int kHandFingers = 2;    // index, thumb

using Vec6 = Eigen::Matrix<double, 6, 1>;

// Filter bank layout and IMU normalization. These are carried inside the
// model config so checkpoints stay self-describing.
struct FeatureConfig {
    double accel_full_scale = 39.24; // m/s^2 (+-4 g)
    double gyro_full_scale = 8.727;  // rad/s (+-500 dps)
    double band_low_lo_hz = 0.22;
    double band_low_hi_hz = 8.0;
    double band_mid_lo_hz = 8.0;
    double band_mid_hi_hz = 32.0;
    double band_high_cut_hz = 32.0;
    int filter_order = 4;
};

// Divide by full scale, clamp to [-1, 1]. Throws on non-finite input.
Vec6 normalize_imu(const ImuSample& sample, double accel_full_scale, double gyro_full_scale);
Vec6 normalize_imu(const ImuSample& sample, const FeatureConfig& cfg);

// One IMU sample after the bank: [component][channel], components ordered
// (band 0.22-8 Hz, band 8-32 Hz, high-pass 32 Hz, original).
struct ImuFeatureSample {
    std::array<double, kImuComponents * kImuChannels> v{};

    double& at(int component, int channel) {
        return v[static_cast<std::size_t>(component * kImuChannels + channel)];
    }
    double at(int component, int channel) const {
        return v[static_cast<std::size_t>(component * kImuChannels + channel)];
    }
};

// The three causal cascades, six channels each. State persists across pushes
// so a stream is filtered exactly once regardless of how windows overlap.
class ImuFilterBank {
public:
    explicit ImuFilterBank(const FeatureConfig& cfg = {});

    ImuFeatureSample push(const Vec6& normalized);
    void reset();

private:
    SosCascade low_, mid_, high_;
};

// Normalize and filter a whole IMU stream once; output aligns 1:1 with input.
std::vector<ImuFeatureSample> filter_imu_stream(std::span<const ImuSample> stream,
                                                const FeatureConfig& cfg);

// Assemble the 200x6x4 tensor from already-filtered samples; every
// (channel, component) series is linearly detrended over the window.
Tensor featurize_imu(std::span<const ImuFeatureSample> window);

// Convenience for batch use: pushes the normalized window through the bank
// (advancing its state), then assembles as above.
Tensor featurize_imu(std::span<const Vec6> normalized_window, ImuFilterBank& bank);

// Central second difference with end replication: a[0] = a[1], a[T-1] = a[T-2].
// Throws if fewer than 3 positions.
std::vector<Vec3> compute_accelerations(std::span<const Vec3> positions, double dt);

// Coordinate frame the hand tensor is expressed in. Surface mode uses the
// registered plane; head mode uses a head pose (featurize_hands substitutes
// each frame's own head pose so the features stay egocentric).
struct ReferenceFrame {
    enum class Mode { Surface, Head };

    Mode mode = Mode::Surface;
    std::optional<SurfacePlane> plane;
    std::optional<HeadPose> head;

    static ReferenceFrame surface(const SurfacePlane& p) {
        ReferenceFrame f;
        f.mode = Mode::Surface;
        f.plane = p;
        return f;
    }
    static ReferenceFrame head_frame(const HeadPose& pose) {
        ReferenceFrame f;
        f.mode = Mode::Head;
        f.head = pose;
        return f;
    }
};

// world -> local under the frame; throws if the needed pose is missing.
Vec3 to_reference_frame(const ReferenceFrame& frame, const Vec3& point);

// Assemble the 60x8x3x2 tensor: axis 1 = (MCP, PIP, DIP, tip positions,
// then their accelerations), axis 2 = local (x, y, z), axis 3 = (index, thumb).
// Accelerations are second differences taken after the frame transform.
// Throws if the window is not exactly kHandWindowLen tracked frames.
Tensor featurize_hands(std::span<const HandFrame> frames, const ReferenceFrame& frame,
                       double dt = 1.0 / 60.0);

// (x, y) of the orthogonal projection of a world point onto the plane,
// in plane-basis meters.
Vec2 project_touch_point(const SurfacePlane& plane, const Vec3& fingertip);

} // namespace sxr
