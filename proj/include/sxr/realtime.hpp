#pragma once

#include "sxr/eval.hpp"
#include "sxr/features.hpp"
#include "sxr/model.hpp"
#include "sxr/session.hpp"

#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sxr {

// ---------------------------------------------------------------------------
// Confidence hysteresis: a label is confirmed once it is the argmax with
// probability strictly above the threshold for `needed` consecutive frames.
// ---------------------------------------------------------------------------
struct HysteresisState {
    int confirmed = 0;  // contact head: 0 no-touch / 1 touch; gesture head: class index
    int candidate = -1; // -1 = no qualifying candidate last frame
    int counter = 0;    // consecutive qualifying frames, capped at `needed`
};

// Advances one frame. Returns the newly confirmed label when the transition
// fires this frame (stable candidate reached `needed` and differs from the
// confirmed label); probabilities exactly at the threshold do not qualify.
std::optional<int> hysteresis_update(HysteresisState& state, std::span<const double> probs,
                                     double threshold = 0.5, int needed = 3);

// (x, y) of the fingertip against the registered surface; without a plane the
// fingertip's own (x, y) pass through unchanged. Meters, matching
// project_touch_point when a plane is present.
Vec2 touch_coordinates(const SurfacePlane* plane, const Vec3& fingertip);

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------
struct TouchEvent {
    enum class Kind { Down, Move, Up };
    Kind kind = Kind::Down;
    TimeNs t = 0;
    Vec2 pos_mm = Vec2::Zero();
    bool has_pos = true; // imu-only runs carry no surface coordinates
};

struct GestureEvent {
    GestureClass gesture = GestureClass::Negative;
    TimeNs t = 0;
};

// Line-delimited records: `event <t_ns> down|move|up [<x> <y>]` and
// `event <t_ns> gesture <class>`.
std::string event_line(const TouchEvent& e);
std::string event_line(const GestureEvent& e);

// ---------------------------------------------------------------------------
// Hysteresis for both heads plus the touch state machine, model-free so the
// event logic is testable on scripted probability sequences.
// ---------------------------------------------------------------------------
class EventMachine {
public:
    explicit EventMachine(double threshold = 0.5, int needed = 3);

    struct Out {
        std::vector<TouchEvent> touch;
        std::vector<GestureEvent> gestures;
    };

    // One prediction frame: P(touch) for the window's last frame, the gesture
    // distribution, and the fingertip surface position (nullptr when the run
    // has no coordinates). Down fires on confirmed no-touch -> touch, move on
    // every further confirmed-contact frame, up on touch -> no-touch with the
    // last known coordinates. A non-Negative gesture fires once on
    // confirmation and re-arms when the confirmed label returns to Negative.
    Out feed(TimeNs t, double p_touch, std::span<const double> gesture_probs, const Vec2* pos_mm);

    const HysteresisState& contact() const { return contact_; }
    const HysteresisState& gesture() const { return gesture_; }
    bool in_contact() const { return in_contact_; }
    TimeNs touch_start() const { return touch_start_; }

private:
    double threshold_;
    int needed_;
    HysteresisState contact_;
    HysteresisState gesture_;
    bool in_contact_ = false;
    TimeNs touch_start_ = 0;
    Vec2 last_pos_ = Vec2::Zero();
    bool has_last_pos_ = false;
};

// ---------------------------------------------------------------------------
// Streaming engine
// ---------------------------------------------------------------------------
struct EngineConfig {
    ModelMode mode = ModelMode::Multi;
    bool use_plane = true; // false: head-frame features and raw (x, y) coordinates
    double threshold = 0.5;
    int needed = 3;
};

struct EngineState {
    std::deque<HandFrame> hand_buffer;       // most recent kHandWindowLen frames
    std::deque<ImuFeatureSample> imu_buffer; // filtered, most recent kImuWindowLen
    ImuFilterBank filter;                    // persists across pushes
    EventMachine events;
};

struct StepResult {
    Prediction prediction;
    std::vector<TouchEvent> touch;
    std::vector<GestureEvent> gestures;
    Vec2 pos_mm = Vec2::Zero(); // fingertip surface coordinates this step
    bool has_pos = false;       // false in imu-only mode
};

// Wall-clock stage totals across steps, monotonic clock.
struct StageTiming {
    double featurize_ms = 0.0;
    double forward_ms = 0.0;
    double postprocess_ms = 0.0;
    double max_step_ms = 0.0;
    int steps = 0;

    double total_ms() const { return featurize_ms + forward_ms + postprocess_ms; }
    double mean_step_ms() const { return steps > 0 ? total_ms() / steps : 0.0; }
};

class Engine {
public:
    // Registered-surface engine. Throws if cfg.use_plane is false here or
    // true in the plane-less overload.
    Engine(const Model& model, const EngineConfig& cfg, const SurfacePlane& plane);
    Engine(const Model& model, const EngineConfig& cfg); // head-frame (no plane)

    // Buffers a sample; IMU samples run through the persistent filter bank.
    // Throws on a per-stream timestamp regression, leaving state unchanged.
    void push(const HandFrame& frame);
    void push(const ImuSample& sample);

    // Full buffers for the active modalities (imu-only ignores hand frames).
    bool ready() const;

    // Featurize the current windows, forward pass (dropout off), hysteresis,
    // events. Throws when not ready.
    StepResult step(TimeNs now);

    const EngineState& state() const { return state_; }
    const StageTiming& timing() const { return timing_; }

    // Windows assembled by the last step (streaming == batch checks).
    const Tensor& hand_window() const { return hand_tensor_; }
    const Tensor& imu_window() const { return imu_tensor_; }

private:
    const Model* model_;
    EngineConfig cfg_;
    bool has_plane_ = false;
    SurfacePlane plane_;
    EngineState state_;
    StageTiming timing_;
    Tensor hand_tensor_, imu_tensor_;
    Model::Workspace ws_;
    std::vector<HandFrame> hand_scratch_;
    std::vector<ImuFeatureSample> imu_scratch_;
    bool have_hand_t_ = false, have_imu_t_ = false;
    TimeNs last_hand_t_ = 0, last_imu_t_ = 0;
    bool have_tracked_ = false;
    std::vector<Vec3> last_tracked_joints_;
};

// ---------------------------------------------------------------------------
// Replay driver: pushes a recording in timestamp order (IMU first on ties)
// and steps at the paper cadence — every hand frame once ready, or every
// 3rd/4th IMU sample (about 60 Hz) in imu-only mode.
// ---------------------------------------------------------------------------
struct ReplayResult {
    std::vector<TouchEvent> touch;
    std::vector<GestureEvent> gestures;
    std::vector<std::string> lines; // event records in emission order
    StageTiming timing;
    int steps = 0;
};

ReplayResult replay_session(const SessionRecording& recording, const Model& model,
                            const EngineConfig& cfg);

// Replay + onset/offset latency against the recording's ground truth.
struct LatencyReport {
    LatencyStats stats;
    StageTiming timing;
    int steps = 0;
};

LatencyReport latency_report(const SessionRecording& recording, const Model& model,
                             const EngineConfig& cfg);

} // namespace sxr
