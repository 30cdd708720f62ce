#pragma once

#include "sxr/geometry.hpp"
#include "sxr/gestures.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sxr {

// Nanoseconds since session start.
using TimeNs = std::int64_t;

inline constexpr TimeNs kMasterPeriodNs = 5'000'000;  // 200 Hz master clock
inline constexpr TimeNs kSecondNs = 1'000'000'000;
inline constexpr double kHandRateHz = 60.0;
inline constexpr double kImuRateHz = 200.0;

// Joint order within HandFrame::joints. Index finger then thumb then wrist;
// head pose is carried separately.
enum HandJoint : int {
    kIndexMcp = 0, kIndexPip, kIndexDip, kIndexTip,
    kThumbMcp, kThumbPip, kThumbDip, kThumbTip,
    kWrist,
    kHandJointCount,
};

struct HandFrame {
    TimeNs t = 0;
    std::vector<Vec3> joints;        // meters, world frame; kHandJointCount entries
    Vec3 head_position = Vec3::Zero();
    Quat head_orientation = Quat::Identity();
    bool tracked = true;

    const Vec3& index_tip() const { return joints[kIndexTip]; }
    const Vec3& thumb_tip() const { return joints[kThumbTip]; }
};

struct ImuSample {
    TimeNs t = 0;
    Vec3 accel = Vec3::Zero(); // m/s^2, sensor frame
    Vec3 gyro = Vec3::Zero();  // rad/s
};

enum class TruthKind : std::uint8_t { ContactDown, ContactUp, GestureStart, GestureEnd };

std::string_view truth_kind_name(TruthKind kind);
TruthKind truth_kind_from_name(std::string_view name);

struct GroundTruthEvent {
    TimeNs t = 0;
    TruthKind kind = TruthKind::ContactDown;
    std::optional<GestureClass> gesture;
    std::optional<Vec2> pos_mm; // tablet coordinates
};

enum class SurfaceOrientation : std::uint8_t { Horizontal, Vertical };

struct SessionHeader {
    int version = 1;
    std::string participant = "p00";
    SurfaceOrientation orientation = SurfaceOrientation::Horizontal;
    SurfacePlane plane;               // registered plane, world frame
    Vec2 tablet_size_mm{254.3, 165.8};
    double hand_rate_hz = kHandRateHz; // fixed by the apparatus
    double imu_rate_hz = kImuRateHz;
};

struct SessionRecording {
    SessionHeader header;
    std::vector<HandFrame> hand_stream;
    std::vector<ImuSample> imu_stream;
    std::vector<GroundTruthEvent> truth_stream;
};

// Throws std::invalid_argument naming the offending record when an invariant
// fails (sorted streams, unit head quaternion, orthonormal plane, alternating
// truth events, in-bounds positions).
void validate_recording(const SessionRecording& recording);

void write_session(const SessionRecording& recording, const std::filesystem::path& path);
SessionRecording read_session(const std::filesystem::path& path);

// One 5 ms master tick referring back to the source streams by index
// (-1 while a stream has not produced a sample yet).
struct SyncedTick {
    TimeNs t = 0;
    std::int32_t hand_idx = -1;
    std::int32_t imu_idx = -1;
    bool contact = false;
    GestureClass gesture = GestureClass::Negative; // active gesture interval, if any

    bool hand_absent() const { return hand_idx < 0; }
    bool imu_absent() const { return imu_idx < 0; }
};

struct SyncedLog {
    TimeNs start = 0;
    TimeNs period = kMasterPeriodNs;
    std::vector<SyncedTick> ticks;
};

// Resample every stream onto the 200 Hz master clock anchored at the first
// IMU timestamp; each tick carries the latest sample at or before its time.
SyncedLog synchronize(const SessionRecording& recording);

// Distinct hand frames (by source timestamp) referenced by a tick range, in order.
std::vector<HandFrame> dedupe_hand(const SessionRecording& recording,
                                   std::span<const SyncedTick> ticks);

struct GestureInterval {
    TimeNs start = 0;
    TimeNs end = 0;
    GestureClass gesture = GestureClass::Negative;
};

// Latest timestamp across all three streams.
TimeNs session_end_time(const SessionRecording& recording);

// Closed truth intervals from the event stream; an unterminated trailing
// interval closes at session_end_time.
std::vector<std::pair<TimeNs, TimeNs>> contact_intervals(const SessionRecording& recording);
std::vector<GestureInterval> gesture_intervals(const SessionRecording& recording);

// True contact / active-gesture state at a time, from the truth stream.
bool contact_state_at(std::span<const std::pair<TimeNs, TimeNs>> intervals, TimeNs t);

} // namespace sxr
