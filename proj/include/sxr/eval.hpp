#pragma once

#include "sxr/gestures.hpp"
#include "sxr/session.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sxr {

// ---------------------------------------------------------------------------
// Confusion matrix: rows = truth, columns = prediction.
// ---------------------------------------------------------------------------
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::vector<std::string> class_names);

    void add(int truth, int pred, std::int64_t n = 1);
    std::int64_t at(int truth, int pred) const;
    int classes() const { return k_; }
    const std::vector<std::string>& names() const { return names_; }
    std::int64_t total() const;

    static ConfusionMatrix for_gestures(); // 9 classes, canonical names
    std::string to_csv() const;            // header row/column of class names

private:
    int k_;
    std::vector<std::string> names_;
    std::vector<std::int64_t> counts_;
};

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0; // truth count
};

struct MacroScores {
    std::vector<ClassScores> per_class; // one per matrix class
    double macro_f1 = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    int included = 0; // classes that entered the macro means
};

// Per-class precision/recall/F1 with 0/0 := 0. The macro means run over
// `include_classes` (all classes when empty), skipping zero-support classes.
MacroScores macro_f1(const ConfusionMatrix& cm, std::span<const int> include_classes = {});

// ---------------------------------------------------------------------------
// Binary window-level contact metrics for the touch class.
// ---------------------------------------------------------------------------
struct BinaryMetrics {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

BinaryMetrics window_contact_metrics(const std::vector<bool>& pred_windows,
                                     const std::vector<bool>& truth_windows);

// Window truth from per-frame labels: strict majority (ties are no-touch).
bool majority_contact(const std::vector<bool>& frames);

// ---------------------------------------------------------------------------
// Hand-to-surface threshold baseline. tau = mean |surface-frame z| of the
// index fingertip over every tracked training frame with true contact;
// a test frame is predicted touching iff its |z| <= tau.
// ---------------------------------------------------------------------------
struct ThresholdBaseline {
    double tau_m = 0.0;
    std::int64_t train_frames = 0; // contact frames that entered the mean
};

ThresholdBaseline fit_threshold_baseline(std::span<const SessionRecording> train);
std::vector<bool> threshold_predict(const ThresholdBaseline& baseline,
                                    const SessionRecording& test); // per hand frame

// ---------------------------------------------------------------------------
// Spatial errors (all in millimetres on the surface).
// ---------------------------------------------------------------------------
struct CrosshairReport {
    std::vector<double> per_trial_mm; // matched trials only, in trial order
    double mean_mm = 0.0;
    double sd_mm = 0.0; // population standard deviation
    int misses = 0;
};

// detected[i] is the tap detected for trial i (nullopt = miss). No outlier
// removal of any kind.
CrosshairReport crosshair_error(std::span<const std::optional<Vec2>> detected_mm,
                                std::span<const Vec2> targets_mm);

struct PathShape {
    enum class Kind { Segment, Circle };
    Kind kind = Kind::Segment;
    Vec2 a = Vec2::Zero(), b = Vec2::Zero(); // segment endpoints
    Vec2 center = Vec2::Zero();              // circle centre
    double radius_mm = 0.0;

    static PathShape segment(const Vec2& a, const Vec2& b);
    static PathShape circle(const Vec2& center, double radius_mm);
};

// Distance from a point to the nearest point of the shape.
double path_point_distance(const PathShape& shape, const Vec2& p_mm);
// Mean nearest-point distance over a trace; throws on an empty trace.
double path_trace_error(std::span<const Vec2> points_mm, const PathShape& shape);

// ---------------------------------------------------------------------------
// Onset/offset latency. Truth events match the nearest unmatched detection
// within the association window (one-to-one, truths processed in time order).
// ---------------------------------------------------------------------------
struct LatencyStats {
    std::optional<double> median_onset_ms;  // absent when nothing matched
    std::optional<double> median_offset_ms;
    double miss_rate = 0.0;           // unmatched truth events / truth events
    double false_positive_rate = 0.0; // unmatched detections / detections
    int matched_onsets = 0;
    int matched_offsets = 0;
};

LatencyStats latency_stats(std::span<const TimeNs> detected_down, std::span<const TimeNs> detected_up,
                           std::span<const TimeNs> truth_down, std::span<const TimeNs> truth_up,
                           TimeNs association_window = 500'000'000);

} // namespace sxr
