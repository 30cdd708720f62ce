#include "sxr/eval.hpp"

#include "sxr/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sxr {

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

// ---------------------------------------------------------------------------
// ConfusionMatrix
// ---------------------------------------------------------------------------

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> class_names)
    : k_(static_cast<int>(class_names.size())), names_(std::move(class_names)) {
    if (k_ <= 0) throw std::invalid_argument("confusion matrix needs at least one class");
    counts_.assign(static_cast<std::size_t>(k_) * static_cast<std::size_t>(k_), 0);
}

void ConfusionMatrix::add(int truth, int pred, std::int64_t n) {
    if (truth < 0 || truth >= k_ || pred < 0 || pred >= k_)
        throw std::out_of_range("confusion matrix index out of range");
    if (n < 0) throw std::invalid_argument("confusion matrix counts are non-negative");
    counts_[static_cast<std::size_t>(truth) * static_cast<std::size_t>(k_) +
            static_cast<std::size_t>(pred)] += n;
}

std::int64_t ConfusionMatrix::at(int truth, int pred) const {
    if (truth < 0 || truth >= k_ || pred < 0 || pred >= k_)
        throw std::out_of_range("confusion matrix index out of range");
    return counts_[static_cast<std::size_t>(truth) * static_cast<std::size_t>(k_) +
                   static_cast<std::size_t>(pred)];
}

std::int64_t ConfusionMatrix::total() const {
    std::int64_t t = 0;
    for (std::int64_t c : counts_) t += c;
    return t;
}

ConfusionMatrix ConfusionMatrix::for_gestures() {
    std::vector<std::string> names;
    names.reserve(kGestureClassCount);
    for (int k = 0; k < kGestureClassCount; ++k)
        names.emplace_back(gesture_name(static_cast<GestureClass>(k)));
    return ConfusionMatrix(std::move(names));
}

std::string ConfusionMatrix::to_csv() const {
    std::string s = "truth\\pred";
    for (const std::string& n : names_) s += "," + n;
    s += "\n";
    for (int r = 0; r < k_; ++r) {
        s += names_[static_cast<std::size_t>(r)];
        for (int c = 0; c < k_; ++c) s += "," + std::to_string(at(r, c));
        s += "\n";
    }
    return s;
}

MacroScores macro_f1(const ConfusionMatrix& cm, std::span<const int> include_classes) {
    const int K = cm.classes();
    MacroScores out;
    out.per_class.resize(static_cast<std::size_t>(K));
    for (int c = 0; c < K; ++c) {
        std::int64_t tp = cm.at(c, c), fp = 0, fn = 0;
        for (int o = 0; o < K; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        ClassScores& s = out.per_class[static_cast<std::size_t>(c)];
        s.support = tp + fn;
        s.precision = safe_div(static_cast<double>(tp), static_cast<double>(tp + fp));
        s.recall = safe_div(static_cast<double>(tp), static_cast<double>(tp + fn));
        s.f1 = safe_div(2.0 * s.precision * s.recall, s.precision + s.recall);
    }

    std::vector<int> wanted(include_classes.begin(), include_classes.end());
    if (wanted.empty())
        for (int c = 0; c < K; ++c) wanted.push_back(c);
    for (int c : wanted) {
        if (c < 0 || c >= K) throw std::out_of_range("macro_f1: class index out of range");
        const ClassScores& s = out.per_class[static_cast<std::size_t>(c)];
        if (s.support == 0) continue; // zero-support classes stay out of the mean
        out.macro_f1 += s.f1;
        out.macro_precision += s.precision;
        out.macro_recall += s.recall;
        ++out.included;
    }
    if (out.included > 0) {
        out.macro_f1 /= out.included;
        out.macro_precision /= out.included;
        out.macro_recall /= out.included;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Contact metrics
// ---------------------------------------------------------------------------

BinaryMetrics window_contact_metrics(const std::vector<bool>& pred_windows,
                                     const std::vector<bool>& truth_windows) {
    if (pred_windows.size() != truth_windows.size())
        throw std::invalid_argument("window_contact_metrics: prediction/truth counts differ");
    BinaryMetrics m;
    for (std::size_t i = 0; i < pred_windows.size(); ++i) {
        const bool p = pred_windows[i], t = truth_windows[i];
        if (p && t)
            ++m.tp;
        else if (p && !t)
            ++m.fp;
        else if (!p && t)
            ++m.fn;
        else
            ++m.tn;
    }
    m.precision = safe_div(static_cast<double>(m.tp), static_cast<double>(m.tp + m.fp));
    m.recall = safe_div(static_cast<double>(m.tp), static_cast<double>(m.tp + m.fn));
    m.f1 = safe_div(2.0 * m.precision * m.recall, m.precision + m.recall);
    return m;
}

bool majority_contact(const std::vector<bool>& frames) {
    std::size_t on = 0;
    for (bool b : frames)
        if (b) ++on;
    return 2 * on > frames.size();
}

// ---------------------------------------------------------------------------
// Threshold baseline
// ---------------------------------------------------------------------------

ThresholdBaseline fit_threshold_baseline(std::span<const SessionRecording> train) {
    double sum = 0.0;
    std::int64_t n = 0;
    for (const SessionRecording& rec : train) {
        const auto contacts = contact_intervals(rec);
        for (const HandFrame& f : rec.hand_stream) {
            if (!f.tracked) continue;
            if (!contact_state_at(contacts, f.t)) continue;
            const Vec3 local = rec.header.plane.to_local(f.index_tip());
            sum += std::abs(local.z());
            ++n;
        }
    }
    if (n == 0) throw std::invalid_argument("threshold baseline: no contact frames in training data");
    return ThresholdBaseline{sum / static_cast<double>(n), n};
}

std::vector<bool> threshold_predict(const ThresholdBaseline& baseline,
                                    const SessionRecording& test) {
    std::vector<bool> out;
    out.reserve(test.hand_stream.size());
    bool last = false;
    for (const HandFrame& f : test.hand_stream) {
        if (f.tracked) {
            const Vec3 local = test.header.plane.to_local(f.index_tip());
            last = std::abs(local.z()) <= baseline.tau_m;
        } // untracked frames hold the previous decision
        out.push_back(last);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spatial errors
// ---------------------------------------------------------------------------

CrosshairReport crosshair_error(std::span<const std::optional<Vec2>> detected_mm,
                                std::span<const Vec2> targets_mm) {
    if (detected_mm.size() != targets_mm.size())
        throw std::invalid_argument("crosshair_error: trial counts differ");
    CrosshairReport rep;
    for (std::size_t i = 0; i < targets_mm.size(); ++i) {
        if (!detected_mm[i]) {
            ++rep.misses;
            continue;
        }
        rep.per_trial_mm.push_back((*detected_mm[i] - targets_mm[i]).norm());
    }
    if (!rep.per_trial_mm.empty()) {
        double sum = 0.0;
        for (double e : rep.per_trial_mm) sum += e;
        rep.mean_mm = sum / static_cast<double>(rep.per_trial_mm.size());
        double var = 0.0;
        for (double e : rep.per_trial_mm) var += (e - rep.mean_mm) * (e - rep.mean_mm);
        rep.sd_mm = std::sqrt(var / static_cast<double>(rep.per_trial_mm.size()));
    }
    return rep;
}

PathShape PathShape::segment(const Vec2& a, const Vec2& b) {
    PathShape s;
    s.kind = Kind::Segment;
    s.a = a;
    s.b = b;
    return s;
}

PathShape PathShape::circle(const Vec2& center, double radius_mm) {
    if (radius_mm <= 0.0) throw std::invalid_argument("circle radius must be positive");
    PathShape s;
    s.kind = Kind::Circle;
    s.center = center;
    s.radius_mm = radius_mm;
    return s;
}

double path_point_distance(const PathShape& shape, const Vec2& p_mm) {
    if (shape.kind == PathShape::Kind::Circle)
        return std::abs((p_mm - shape.center).norm() - shape.radius_mm);
    const Vec2 d = shape.b - shape.a;
    const double len2 = d.squaredNorm();
    if (len2 == 0.0) return (p_mm - shape.a).norm();
    const double t = std::clamp((p_mm - shape.a).dot(d) / len2, 0.0, 1.0);
    return (p_mm - (shape.a + t * d)).norm();
}

double path_trace_error(std::span<const Vec2> points_mm, const PathShape& shape) {
    if (points_mm.empty()) throw std::invalid_argument("path_trace_error: empty trace");
    double sum = 0.0;
    for (const Vec2& p : points_mm) sum += path_point_distance(shape, p);
    return sum / static_cast<double>(points_mm.size());
}

// ---------------------------------------------------------------------------
// Latency
// ---------------------------------------------------------------------------

namespace {

// One-to-one nearest matching within the window; truths in time order pick
// the closest unmatched detection (earlier one on a tie).
std::vector<double> match_deltas_ms(std::span<const TimeNs> detected, std::span<const TimeNs> truth,
                                    TimeNs window, int& unmatched_truth, int& unmatched_detections) {
    std::vector<bool> used(detected.size(), false);
    std::vector<double> deltas;
    for (const TimeNs t : truth) {
        std::ptrdiff_t best = -1;
        TimeNs best_abs = window + 1;
        for (std::size_t i = 0; i < detected.size(); ++i) {
            if (used[i]) continue;
            const TimeNs diff = detected[i] - t;
            const TimeNs mag = diff < 0 ? -diff : diff;
            if (mag <= window && mag < best_abs) {
                best = static_cast<std::ptrdiff_t>(i);
                best_abs = mag;
            }
        }
        if (best < 0) {
            ++unmatched_truth;
            continue;
        }
        used[static_cast<std::size_t>(best)] = true;
        deltas.push_back(static_cast<double>(detected[static_cast<std::size_t>(best)] - t) / 1e6);
    }
    for (bool u : used)
        if (!u) ++unmatched_detections;
    return deltas;
}

} // namespace

LatencyStats latency_stats(std::span<const TimeNs> detected_down, std::span<const TimeNs> detected_up,
                           std::span<const TimeNs> truth_down, std::span<const TimeNs> truth_up,
                           TimeNs association_window) {
    LatencyStats out;
    int missed = 0, spurious = 0;
    const std::vector<double> onsets =
        match_deltas_ms(detected_down, truth_down, association_window, missed, spurious);
    const std::vector<double> offsets =
        match_deltas_ms(detected_up, truth_up, association_window, missed, spurious);
    out.matched_onsets = static_cast<int>(onsets.size());
    out.matched_offsets = static_cast<int>(offsets.size());
    if (!onsets.empty()) out.median_onset_ms = median_of(onsets);
    if (!offsets.empty()) out.median_offset_ms = median_of(offsets);
    const std::size_t truth_total = truth_down.size() + truth_up.size();
    const std::size_t det_total = detected_down.size() + detected_up.size();
    out.miss_rate = truth_total == 0 ? 0.0 : static_cast<double>(missed) / static_cast<double>(truth_total);
    out.false_positive_rate =
        det_total == 0 ? 0.0 : static_cast<double>(spurious) / static_cast<double>(det_total);
    return out;
}

} // namespace sxr
