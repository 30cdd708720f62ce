#include "sxr/features.hpp"

#include <cmath>
#include <stdexcept>

namespace sxr {

namespace {

double clamp_unit(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }

} // namespace

Vec6 normalize_imu(const ImuSample& sample, double accel_full_scale, double gyro_full_scale) {
    if (accel_full_scale <= 0.0 || gyro_full_scale <= 0.0)
        throw std::invalid_argument("IMU full-scale values must be positive");
    if (!sample.accel.allFinite() || !sample.gyro.allFinite())
        throw std::invalid_argument("non-finite IMU sample");
    Vec6 out;
    for (int i = 0; i < 3; ++i) out[i] = clamp_unit(sample.accel[i] / accel_full_scale);
    for (int i = 0; i < 3; ++i) out[3 + i] = clamp_unit(sample.gyro[i] / gyro_full_scale);
    return out;
}

Vec6 normalize_imu(const ImuSample& sample, const FeatureConfig& cfg) {
    return normalize_imu(sample, cfg.accel_full_scale, cfg.gyro_full_scale);
}

ImuFilterBank::ImuFilterBank(const FeatureConfig& cfg)
    : low_(design_sos_bandpass(cfg.band_low_lo_hz, cfg.band_low_hi_hz, kImuRateHz,
                               cfg.filter_order, kImuChannels)),
      mid_(design_sos_bandpass(cfg.band_mid_lo_hz, cfg.band_mid_hi_hz, kImuRateHz,
                               cfg.filter_order, kImuChannels)),
      high_(design_sos_highpass(cfg.band_high_cut_hz, kImuRateHz, cfg.filter_order,
                                kImuChannels)) {}

ImuFeatureSample ImuFilterBank::push(const Vec6& normalized) {
    ImuFeatureSample out;
    for (int ch = 0; ch < kImuChannels; ++ch) {
        double x = normalized[ch];
        out.at(0, ch) = low_.step(x, ch);
        out.at(1, ch) = mid_.step(x, ch);
        out.at(2, ch) = high_.step(x, ch);
        out.at(3, ch) = x;
    }
    return out;
}

void ImuFilterBank::reset() {
    low_.reset();
    mid_.reset();
    high_.reset();
}

std::vector<ImuFeatureSample> filter_imu_stream(std::span<const ImuSample> stream,
                                                const FeatureConfig& cfg) {
    ImuFilterBank bank(cfg);
    std::vector<ImuFeatureSample> out;
    out.reserve(stream.size());
    for (const ImuSample& s : stream) out.push_back(bank.push(normalize_imu(s, cfg)));
    return out;
}

Tensor featurize_imu(std::span<const ImuFeatureSample> window) {
    if (window.size() != static_cast<std::size_t>(kImuWindowLen))
        throw std::invalid_argument("IMU window must hold exactly " +
                                    std::to_string(kImuWindowLen) + " samples");
    Tensor tensor({kImuWindowLen, kImuChannels, kImuComponents});
    std::vector<double> series(static_cast<std::size_t>(kImuWindowLen));
    for (int ch = 0; ch < kImuChannels; ++ch) {
        for (int comp = 0; comp < kImuComponents; ++comp) {
            for (int t = 0; t < kImuWindowLen; ++t)
                series[static_cast<std::size_t>(t)] = window[static_cast<std::size_t>(t)].at(comp, ch);
            detrend_in_place(series);
            for (int t = 0; t < kImuWindowLen; ++t)
                tensor(t, ch, comp) = series[static_cast<std::size_t>(t)];
        }
    }
    return tensor;
}

Tensor featurize_imu(std::span<const Vec6> normalized_window, ImuFilterBank& bank) {
    if (normalized_window.size() != static_cast<std::size_t>(kImuWindowLen))
        throw std::invalid_argument("IMU window must hold exactly " +
                                    std::to_string(kImuWindowLen) + " samples");
    std::vector<ImuFeatureSample> filtered;
    filtered.reserve(normalized_window.size());
    for (const Vec6& x : normalized_window) filtered.push_back(bank.push(x));
    return featurize_imu(filtered);
}

std::vector<Vec3> compute_accelerations(std::span<const Vec3> positions, double dt) {
    if (positions.size() < 3)
        throw std::invalid_argument("acceleration needs at least 3 position frames");
    if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
    const double inv_dt2 = 1.0 / (dt * dt);
    std::vector<Vec3> accel(positions.size());
    for (std::size_t k = 1; k + 1 < positions.size(); ++k)
        accel[k] = (positions[k + 1] - 2.0 * positions[k] + positions[k - 1]) * inv_dt2;
    accel.front() = accel[1];
    accel.back() = accel[accel.size() - 2];
    return accel;
}

Vec3 to_reference_frame(const ReferenceFrame& frame, const Vec3& point) {
    if (frame.mode == ReferenceFrame::Mode::Surface) {
        if (!frame.plane) throw std::invalid_argument("surface frame is missing its plane");
        return frame.plane->to_local(point);
    }
    if (!frame.head) throw std::invalid_argument("head frame is missing its pose");
    return frame.head->to_local(point);
}

Tensor featurize_hands(std::span<const HandFrame> frames, const ReferenceFrame& frame,
                       double dt) {
    if (frames.size() != static_cast<std::size_t>(kHandWindowLen))
        throw std::invalid_argument("hand window must hold exactly " +
                                    std::to_string(kHandWindowLen) + " frames");
    for (const HandFrame& f : frames)
        if (!f.tracked)
            throw std::invalid_argument("hand window contains an untracked frame");
    if (frame.mode == ReferenceFrame::Mode::Surface && !frame.plane)
        throw std::invalid_argument("surface frame is missing its plane");

    // joint order matches the tensor rows: MCP, PIP, DIP, tip per finger
    static constexpr int kFingerJoints[kHandFingers][4] = {
        {kIndexMcp, kIndexPip, kIndexDip, kIndexTip},
        {kThumbMcp, kThumbPip, kThumbDip, kThumbTip},
    };

    Tensor tensor({kHandWindowLen, kHandFeatures, 3, kHandFingers});
    std::vector<Vec3> local(static_cast<std::size_t>(kHandWindowLen));
    for (int finger = 0; finger < kHandFingers; ++finger) {
        for (int joint = 0; joint < 4; ++joint) {
            for (int t = 0; t < kHandWindowLen; ++t) {
                const HandFrame& f = frames[static_cast<std::size_t>(t)];
                const Vec3& world = f.joints[static_cast<std::size_t>(kFingerJoints[finger][joint])];
                if (frame.mode == ReferenceFrame::Mode::Surface) {
                    local[static_cast<std::size_t>(t)] = frame.plane->to_local(world);
                } else {
                    HeadPose pose{f.head_position, f.head_orientation};
                    local[static_cast<std::size_t>(t)] = pose.to_local(world);
                }
            }
            std::vector<Vec3> accel = compute_accelerations(local, dt);
            for (int t = 0; t < kHandWindowLen; ++t) {
                for (int d = 0; d < 3; ++d) {
                    tensor(t, joint, d, finger) = local[static_cast<std::size_t>(t)][d];
                    tensor(t, 4 + joint, d, finger) = accel[static_cast<std::size_t>(t)][d];
                }
            }
        }
    }
    return tensor;
}

Vec2 project_touch_point(const SurfacePlane& plane, const Vec3& fingertip) {
    Vec3 local = plane.to_local(fingertip);
    return Vec2(local.x(), local.y());
}

} // namespace sxr
