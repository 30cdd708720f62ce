#pragma once

#include "sxr/eval.hpp"
#include "sxr/features.hpp"
#include "sxr/model.hpp"
#include "sxr/session.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sxr {

inline constexpr TimeNs kGestureExpandNs = 30'000'000; // label expansion, each side
inline constexpr int kWindowTicks = 200;               // 1 s on the master clock
inline constexpr int kGestureStrideTicks = 6;          // 30 ms
inline constexpr int kContactStrideTicks = 100;        // 500 ms

// Gesture interval widened by 30 ms on each side and clamped to
// [0, session_end]. Throws on an empty-duration interval.
std::pair<TimeNs, TimeNs> expand_gesture_interval(TimeNs start, TimeNs end, TimeNs session_end);

// One training window: labels are computed at enumeration time, tensors are
// materialized on demand (realize) to keep large corpora cheap to hold.
struct WindowRef {
    std::size_t session = 0; // corpus index; 0 when enumerating a single session
    std::size_t start_tick = 0;
    GestureClass gesture_label = GestureClass::Negative;
    std::array<bool, kHandWindowLen> contact_labels{};
};

struct WindowMeta {
    std::string participant;
    std::size_t session = 0;
    std::size_t start_tick = 0;
};

struct WindowSample {
    Tensor hand; // kHandWindowLen x kHandFeatures x 3 x kHandFingers
    Tensor imu;  // kImuWindowLen x kImuChannels x kImuComponents
    std::array<bool, kHandWindowLen> contact_labels{};
    GestureClass gesture_label = GestureClass::Negative;
    WindowMeta meta;
};

// A recording prepared for windowing: synchronized once, the IMU stream
// filtered once with persistent state (so overlapping windows see identical
// samples), truth intervals extracted, and hand tracking loss gap-filled.
class WindowedSession {
public:
    // Requires non-empty hand and IMU streams and at least one tracked frame.
    WindowedSession(SessionRecording recording, const FeatureConfig& features);

    const SessionRecording& recording() const { return rec_; }
    const SyncedLog& log() const { return log_; }
    std::size_t tick_count() const { return log_.ticks.size(); }

    // The 60 hand frames backing a window: the last 60 distinct frames its
    // ticks reference, left-padded by repeating the earliest when fewer.
    // Entries are indices into recording().hand_stream (label timestamps);
    // untracked frames take their joints from the most recent tracked one.
    std::array<std::int32_t, kHandWindowLen> hand_frame_indices(std::size_t start_tick) const;

    // Ground-truth contact state at each selected frame's timestamp.
    std::array<bool, kHandWindowLen> window_contact_labels(std::size_t start_tick) const;

    // Gesture whose expanded interval lies entirely inside the window
    // [t, t + 1 s]; the latest-starting one wins when several fit.
    GestureClass window_gesture_label(std::size_t start_tick) const;

    WindowSample realize(const WindowRef& ref,
                         ReferenceFrame::Mode frame_mode = ReferenceFrame::Mode::Surface) const;

private:
    SessionRecording rec_;
    FeatureConfig features_;
    SyncedLog log_;
    std::vector<ImuFeatureSample> imu_filtered_;
    std::vector<std::int32_t> joint_source_;               // per hand frame
    std::vector<std::pair<TimeNs, TimeNs>> contact_;
    std::vector<GestureInterval> expanded_;                // clamped label intervals
};

// Gesture-task windows: 1 s every 6 ticks (30 ms). Windows not containing a
// complete expanded gesture are Negative.
std::vector<WindowRef> window_gesture(const WindowedSession& session);

// Contact-task windows: 1 s every 100 ticks (500 ms); gesture label always
// Negative (spatial traces must not read as gestures).
std::vector<WindowRef> window_contact(const WindowedSession& session);

// Inverse-frequency weights: w[c] = N / (K_present * N_c), absent classes 0.
// The sample-weighted mean is exactly 1. Throws on empty labels or a label
// outside [0, n_classes).
std::vector<double> class_weights(std::span<const int> labels, int n_classes);

// Per-task loss weights over a merged training set: gesture weights from the
// window labels, contact weights from the pooled per-frame labels.
LossWeights fit_loss_weights(std::span<const WindowRef> train);

// Deterministic per-class thinning: keeps at most `max_per_class` windows of
// each gesture label, evenly strided through that class's occurrences, and
// preserves the original relative order.
std::vector<WindowRef> subsample_per_class(std::span<const WindowRef> refs,
                                           std::size_t max_per_class);

// ---------------------------------------------------------------------------
// Leave-one-participant-out folds.
// ---------------------------------------------------------------------------
struct SplitPlan {
    struct Fold {
        std::vector<std::string> train;
        std::string test;
    };
    std::vector<Fold> folds; // one per participant, in input order
};

// Throws on fewer than two participants or duplicated ids.
SplitPlan lopo_splits(std::span<const std::string> participants);

// ---------------------------------------------------------------------------
// Training loop.
// ---------------------------------------------------------------------------
struct TrainConfig {
    int epochs = 100;
    int batch_size = 128;
    double lr = 3e-4;
    std::uint64_t seed = 1;
    int eval_every = 1; // epochs between held-out evaluations; 0 disables
    ModelMode mode = ModelMode::Multi;
    ReferenceFrame::Mode frame_mode = ReferenceFrame::Mode::Surface;
    double contact_term_weight = 0.5;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    // NaN when the epoch had no held-out evaluation.
    double heldout_gesture_f1 = std::numeric_limits<double>::quiet_NaN();
    double heldout_contact_f1 = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    std::vector<EpochStats> history;
    std::string history_csv() const; // epoch,loss,gesture_f1,contact_f1
};

struct HeldoutMetrics {
    ConfusionMatrix gesture_cm = ConfusionMatrix::for_gestures();
    MacroScores gesture;    // all classes included
    BinaryMetrics contact;  // window level, majority vote per window
};

// Runs the model over windows in eval mode. Window contact prediction is the
// majority of per-frame P(touch) > 0.5.
HeldoutMetrics evaluate_windows(const Model& model, std::span<const WindowedSession> sessions,
                                std::span<const WindowRef> refs,
                                ModelMode mode = ModelMode::Multi,
                                ReferenceFrame::Mode frame_mode = ReferenceFrame::Mode::Surface);

// Seeded-shuffle mini-batch Adam over the merged window set. Gradients are
// averaged within each batch in batch order; the whole loop is sequential and
// bit-deterministic for a fixed config.
TrainResult train_loop(Model& model, std::span<const WindowedSession> sessions,
                       std::span<const WindowRef> train, std::span<const WindowRef> heldout,
                       const TrainConfig& cfg);

} // namespace sxr
