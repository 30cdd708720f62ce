#pragma once

#include "sxr/eval.hpp" // PathShape
#include "sxr/rng.hpp"
#include "sxr/session.hpp"

#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace sxr {

// Caps on the tracking/registration noise model.
inline constexpr double kMaxTrackingBiasM = 0.015;
inline constexpr double kMaxJitterSigmaM = 0.005;
inline constexpr double kMaxPlaneTiltDeg = 3.0;
inline constexpr double kMaxPlaneOffsetM = 0.010;

// Per-participant noise parameters. Biases and the plane error are in the
// true plane's local axes (z = surface normal).
struct ParticipantProfile {
    std::uint64_t seed = 1;
    double hand_scale = 1.0;
    Vec3 tracking_bias_m = Vec3::Zero();
    double jitter_sigma_m = 0.0;  // per-axis stationary std of tracking jitter
    double dropout_rate = 0.0;    // per-frame tracking-loss probability
    double plane_tilt_deg = 0.0;  // registration tilt error
    double plane_offset_m = 0.0;  // registration offset along the normal
    double accel_noise = 0.0;     // m/s^2 white noise
    double gyro_noise = 0.0;      // rad/s white noise
    double impulse_gain = 0.0;    // contact burst amplitude, m/s^2

    void validate() const; // enforces the caps above

    static ParticipantProfile clean(std::uint64_t seed);   // noise-free
    static ParticipantProfile nominal(std::uint64_t seed); // study defaults
};

// ---------------------------------------------------------------------------
// True kinematics: piecewise-C1 index/thumb/wrist paths in true-plane-local
// meters, with exact contact and gesture intervals.
// ---------------------------------------------------------------------------
struct TruePose {
    Vec3 index = Vec3::Zero();
    Vec3 thumb = Vec3::Zero();
    Vec3 wrist = Vec3::Zero();
};

class TrueMotion {
public:
    using PoseFn = std::function<TruePose(TimeNs)>; // local time within phase

    TimeNs end_time() const { return end_; }
    const TruePose& last_pose() const { return last_; }
    TruePose at(TimeNs t) const; // clamps outside [0, end]

    const std::vector<std::pair<TimeNs, TimeNs>>& contacts() const { return contacts_; }
    const std::vector<GestureInterval>& gestures() const { return gestures_; }

    // Builders. Every phase starts and ends at rest, so the composite is C1.
    void set_start(const TruePose& pose); // only before any phase
    void hold(TimeNs dur);
    void move_to(TimeNs dur, const TruePose& target); // smoothstep
    void custom(TimeNs dur, PoseFn fn);
    void mark_contact(TimeNs start, TimeNs end);      // must not overlap
    void mark_gesture(TimeNs start, TimeNs end, GestureClass g);

private:
    struct Phase {
        TimeNs t0 = 0, t1 = 0;
        PoseFn fn;
    };
    std::vector<Phase> phases_;
    std::vector<std::pair<TimeNs, TimeNs>> contacts_;
    std::vector<GestureInterval> gestures_;
    TruePose last_{};
    TimeNs end_ = 0;
};

// Hover rest pose above a surface point.
TruePose rest_pose(const Vec2& location_m);

// Full 9-joint chain behind the two tracked tips, scaled around the wrist.
std::array<Vec3, kHandJointCount> synth_joints(const TruePose& pose, double hand_scale);

// Standalone gesture starting and ending at hover rest. `contact_duration`
// is the per-contact dwell (taps 80-200 ms, swipes 150-400 ms, pinches
// 300-600 ms); out-of-range durations or Negative throw.
TrueMotion gesture_trajectory(GestureClass kind, const Vec2& location_m,
                              TimeNs contact_duration, RngStream& rng);

// Appends the same gesture onto an existing motion (align move included).
void append_gesture(TrueMotion& motion, GestureClass kind, const Vec2& location_m,
                    TimeNs contact_duration, RngStream& rng);

// ---------------------------------------------------------------------------
// Scripts
// ---------------------------------------------------------------------------
struct ScriptSegment {
    enum class Kind { Gesture, Trace, Hover, NegativeMimic };
    Kind kind = Kind::Hover;
    GestureClass gesture = GestureClass::Negative; // Gesture segments
    Vec2 location_m{0.127, 0.083};                 // action centre, plane-local
    TimeNs start = 0;                              // earliest begin time
    TimeNs duration = 0; // contact dwell (Gesture), trace time (Trace), hold time otherwise
    PathShape shape;     // Trace segments, tablet mm
};

struct MotionScript {
    std::vector<ScriptSegment> segments; // strictly increasing start times
    TimeNs tail = 400'000'000;           // idle padding after the last segment

    void validate() const;
};

// Shuffled reps of all eight gestures plus mid-air negatives, randomized
// locations and dwell times, generous spacing.
MotionScript make_gesture_script(int reps_per_class, int negatives, const Vec2& tablet_mm,
                                 RngStream& rng);

// ---------------------------------------------------------------------------
// Sensor simulation
// ---------------------------------------------------------------------------

// 60 Hz tracking: observed = truth + constant bias + low-pass-filtered
// Gaussian jitter (input variance compensated so the stationary per-axis std
// equals jitter_sigma_m); dropout frames freeze the previous observation.
std::vector<HandFrame> simulate_tracking(const TrueMotion& motion,
                                         const ParticipantProfile& profile,
                                         const SurfacePlane& true_plane, TimeNs t_end,
                                         RngStream& rng);

// 200 Hz IMU: accel = second difference of the wrist path + gravity, in
// plane-local sensor axes, plus white noise and a damped sinusoid burst
// (40-90 Hz, 20-50 ms decay, impulse_gain amplitude) at each contact onset.
std::vector<ImuSample> simulate_imu(const TrueMotion& motion, const ParticipantProfile& profile,
                                    const SurfacePlane& true_plane, TimeNs t_end,
                                    RngStream& rng);

// Registered plane: true plane tilted about a random in-plane axis and offset
// along its normal.
SurfacePlane perturb_plane(const SurfacePlane& true_plane, const ParticipantProfile& profile,
                           RngStream& rng);

// Canonical true planes for the two apparatus orientations.
SurfacePlane study_plane(SurfaceOrientation orientation);

// ---------------------------------------------------------------------------
// Session generation
// ---------------------------------------------------------------------------

// Full labeled recording: truth events sit exactly at the kinematic contact
// and gesture boundaries; the header carries the perturbed plane. Throws on
// overlapping segments.
SessionRecording generate_session(const MotionScript& script, const ParticipantProfile& profile,
                                  const SurfacePlane& true_plane, std::uint64_t seed,
                                  const std::string& participant = "p00",
                                  SurfaceOrientation orientation = SurfaceOrientation::Horizontal);

struct SpatialTask {
    enum class Kind { Crosshair, PathLine, PathCircle };

    SessionRecording session;
    std::vector<Vec2> targets_mm;  // crosshair targets, one per trial
    std::vector<PathShape> shapes; // traced shapes, one per trial
};

// Crosshair taps at uniform random targets, or traced line/circle paths
// (lines 5-15 cm, circle diameters 5-10 cm), with human-like tracing wobble.
SpatialTask generate_spatial_task(SpatialTask::Kind kind, int trials,
                                  const ParticipantProfile& profile,
                                  const SurfacePlane& true_plane, std::uint64_t seed,
                                  const std::string& participant = "p00");

// ---------------------------------------------------------------------------
// Scenario files: plain text, one `key value...` per line, '#' comments.
// ---------------------------------------------------------------------------
struct Scenario {
    std::string participant = "p01";
    std::uint64_t seed = 1;
    SurfaceOrientation orientation = SurfaceOrientation::Horizontal;
    ParticipantProfile profile;
    int reps = 0;      // auto-script gesture reps per class
    int negatives = 0; // auto-script mid-air negatives
    std::vector<ScriptSegment> segments; // explicit script (used when reps == 0)
};

Scenario parse_scenario(const std::string& text); // throws with line numbers
SessionRecording realize_scenario(const Scenario& scenario);

} // namespace sxr
