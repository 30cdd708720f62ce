#include "sxr/dataset.hpp"

#include "sxr/nn.hpp"
#include "sxr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace sxr {

namespace {

// Sub-stream ids for the training loop's RNG draws.
constexpr std::uint64_t kShuffleStream = 0x5A;
constexpr std::uint64_t kDropoutStream = 0xD0;

} // namespace

std::pair<TimeNs, TimeNs> expand_gesture_interval(TimeNs start, TimeNs end, TimeNs session_end) {
    if (start >= end) throw std::invalid_argument("expand_gesture_interval: empty interval");
    const TimeNs lo = std::max<TimeNs>(0, start - kGestureExpandNs);
    const TimeNs hi = std::min(session_end, end + kGestureExpandNs);
    return {lo, hi};
}

// ---------------------------------------------------------------------------
// WindowedSession
// ---------------------------------------------------------------------------

WindowedSession::WindowedSession(SessionRecording recording, const FeatureConfig& features)
    : rec_(std::move(recording)), features_(features) {
    if (rec_.hand_stream.empty() || rec_.imu_stream.empty())
        throw std::invalid_argument("windowed session needs hand and IMU samples");

    log_ = synchronize(rec_);
    imu_filtered_ = filter_imu_stream(rec_.imu_stream, features_);
    contact_ = contact_intervals(rec_);

    const TimeNs end = session_end_time(rec_);
    for (const GestureInterval& g : gesture_intervals(rec_)) {
        const auto [lo, hi] = expand_gesture_interval(g.start, g.end, end);
        expanded_.push_back({lo, hi, g.gesture});
    }

    // Joint source per frame: the frame itself when tracked, otherwise the
    // most recent tracked frame (the first tracked one for a leading gap).
    const auto n = static_cast<std::int32_t>(rec_.hand_stream.size());
    joint_source_.assign(static_cast<std::size_t>(n), -1);
    std::int32_t last_tracked = -1;
    for (std::int32_t i = 0; i < n; ++i) {
        if (rec_.hand_stream[static_cast<std::size_t>(i)].tracked) last_tracked = i;
        joint_source_[static_cast<std::size_t>(i)] = last_tracked;
    }
    std::int32_t first_tracked = -1;
    for (std::int32_t i = 0; i < n; ++i)
        if (rec_.hand_stream[static_cast<std::size_t>(i)].tracked) {
            first_tracked = i;
            break;
        }
    if (first_tracked < 0)
        throw std::invalid_argument("windowed session has no tracked hand frames");
    for (std::int32_t i = 0; i < n; ++i)
        if (joint_source_[static_cast<std::size_t>(i)] < 0)
            joint_source_[static_cast<std::size_t>(i)] = first_tracked;
}

std::array<std::int32_t, kHandWindowLen>
WindowedSession::hand_frame_indices(std::size_t start_tick) const {
    if (start_tick + kWindowTicks > log_.ticks.size())
        throw std::out_of_range("window extends past the session");

    // Distinct source frames referenced by the window's ticks, in time order.
    std::vector<std::int32_t> distinct;
    distinct.reserve(kHandWindowLen + 4);
    std::int32_t prev = -1;
    for (std::size_t k = start_tick; k < start_tick + kWindowTicks; ++k) {
        const std::int32_t h = log_.ticks[k].hand_idx;
        if (h >= 0 && h != prev) {
            distinct.push_back(h);
            prev = h;
        }
    }
    if (distinct.empty()) distinct.push_back(0); // window precedes the hand stream

    std::array<std::int32_t, kHandWindowLen> out{};
    const std::size_t m = distinct.size();
    if (m >= kHandWindowLen) {
        std::copy_n(distinct.end() - kHandWindowLen, kHandWindowLen, out.begin());
    } else {
        const std::size_t pad = kHandWindowLen - m;
        std::fill_n(out.begin(), pad, distinct.front());
        std::copy(distinct.begin(), distinct.end(), out.begin() + static_cast<std::ptrdiff_t>(pad));
    }
    return out;
}

std::array<bool, kHandWindowLen>
WindowedSession::window_contact_labels(std::size_t start_tick) const {
    const auto idx = hand_frame_indices(start_tick);
    std::array<bool, kHandWindowLen> labels{};
    for (int i = 0; i < kHandWindowLen; ++i) {
        const HandFrame& f = rec_.hand_stream[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
        labels[static_cast<std::size_t>(i)] = contact_state_at(contact_, f.t);
    }
    return labels;
}

GestureClass WindowedSession::window_gesture_label(std::size_t start_tick) const {
    const TimeNs t0 = log_.start + static_cast<TimeNs>(start_tick) * log_.period;
    const TimeNs t1 = t0 + kSecondNs;
    GestureClass best = GestureClass::Negative;
    TimeNs best_start = 0;
    for (const GestureInterval& g : expanded_) {
        if (g.start >= t0 && g.end <= t1 && (best == GestureClass::Negative || g.start > best_start)) {
            best = g.gesture;
            best_start = g.start;
        }
    }
    return best;
}

WindowSample WindowedSession::realize(const WindowRef& ref, ReferenceFrame::Mode frame_mode) const {
    if (ref.start_tick + kWindowTicks > log_.ticks.size())
        throw std::out_of_range("window extends past the session");

    WindowSample s;
    s.contact_labels = ref.contact_labels;
    s.gesture_label = ref.gesture_label;
    s.meta = {rec_.header.participant, ref.session, ref.start_tick};

    // Hand tensor: gap-filled joints, each slot keeping its own timestamp and
    // head pose (head tracking survives hand-tracking loss).
    const auto idx = hand_frame_indices(ref.start_tick);
    std::vector<HandFrame> frames(kHandWindowLen);
    for (int i = 0; i < kHandWindowLen; ++i) {
        const auto slot = static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
        HandFrame f = rec_.hand_stream[slot];
        const auto src = static_cast<std::size_t>(joint_source_[slot]);
        if (src != slot) f.joints = rec_.hand_stream[src].joints;
        f.tracked = true;
        frames[static_cast<std::size_t>(i)] = std::move(f);
    }
    const ReferenceFrame frame =
        frame_mode == ReferenceFrame::Mode::Surface
            ? ReferenceFrame::surface(rec_.header.plane)
            : ReferenceFrame::head_frame(
                  {frames.front().head_position, frames.front().head_orientation});
    s.hand = featurize_hands(frames, frame);

    // IMU tensor: gather the already-filtered stream through the tick map.
    std::vector<ImuFeatureSample> window(kImuWindowLen);
    for (int k = 0; k < kImuWindowLen; ++k) {
        const std::int32_t j = log_.ticks[ref.start_tick + static_cast<std::size_t>(k)].imu_idx;
        if (j < 0) throw std::logic_error("master tick without an IMU sample");
        window[static_cast<std::size_t>(k)] = imu_filtered_[static_cast<std::size_t>(j)];
    }
    s.imu = featurize_imu(window);
    return s;
}

// ---------------------------------------------------------------------------
// Window enumeration
// ---------------------------------------------------------------------------

namespace {

std::vector<WindowRef> enumerate_windows(const WindowedSession& s, int stride, bool label_gestures) {
    std::vector<WindowRef> out;
    const std::size_t n = s.tick_count();
    if (n < kWindowTicks) return out;
    for (std::size_t w = 0; w + kWindowTicks <= n; w += static_cast<std::size_t>(stride)) {
        WindowRef ref;
        ref.start_tick = w;
        ref.contact_labels = s.window_contact_labels(w);
        ref.gesture_label = label_gestures ? s.window_gesture_label(w) : GestureClass::Negative;
        out.push_back(ref);
    }
    return out;
}

} // namespace

std::vector<WindowRef> window_gesture(const WindowedSession& session) {
    return enumerate_windows(session, kGestureStrideTicks, true);
}

std::vector<WindowRef> window_contact(const WindowedSession& session) {
    return enumerate_windows(session, kContactStrideTicks, false);
}

// ---------------------------------------------------------------------------
// Class weights and splits
// ---------------------------------------------------------------------------

std::vector<double> class_weights(std::span<const int> labels, int n_classes) {
    if (labels.empty()) throw std::invalid_argument("class_weights: no labels");
    if (n_classes <= 0) throw std::invalid_argument("class_weights: no classes");
    std::vector<std::int64_t> counts(static_cast<std::size_t>(n_classes), 0);
    for (int l : labels) {
        if (l < 0 || l >= n_classes) throw std::out_of_range("class_weights: label out of range");
        ++counts[static_cast<std::size_t>(l)];
    }
    int present = 0;
    for (std::int64_t c : counts)
        if (c > 0) ++present;
    const auto total = static_cast<double>(labels.size());
    std::vector<double> w(static_cast<std::size_t>(n_classes), 0.0);
    for (int c = 0; c < n_classes; ++c)
        if (counts[static_cast<std::size_t>(c)] > 0)
            w[static_cast<std::size_t>(c)] =
                total / (static_cast<double>(present) * static_cast<double>(counts[static_cast<std::size_t>(c)]));
    return w;
}

LossWeights fit_loss_weights(std::span<const WindowRef> train) {
    std::vector<int> gesture_labels, contact_labels;
    gesture_labels.reserve(train.size());
    contact_labels.reserve(train.size() * kHandWindowLen);
    for (const WindowRef& r : train) {
        gesture_labels.push_back(static_cast<int>(r.gesture_label));
        for (bool b : r.contact_labels) contact_labels.push_back(b ? 1 : 0);
    }
    const std::vector<double> gw = class_weights(gesture_labels, kGestureClassCount);
    const std::vector<double> cw = class_weights(contact_labels, 2);
    LossWeights w = LossWeights::unit();
    for (int c = 0; c < kGestureClassCount; ++c) w.gesture.flat(c) = gw[static_cast<std::size_t>(c)];
    for (int c = 0; c < 2; ++c) w.contact.flat(c) = cw[static_cast<std::size_t>(c)];
    return w;
}

std::vector<WindowRef> subsample_per_class(std::span<const WindowRef> refs,
                                           std::size_t max_per_class) {
    if (max_per_class == 0) return {};
    std::array<std::vector<std::size_t>, kGestureClassCount> by_class;
    for (std::size_t i = 0; i < refs.size(); ++i)
        by_class[static_cast<std::size_t>(refs[i].gesture_label)].push_back(i);

    std::vector<std::size_t> keep;
    for (const auto& members : by_class) {
        if (members.size() <= max_per_class) {
            keep.insert(keep.end(), members.begin(), members.end());
        } else {
            for (std::size_t k = 0; k < max_per_class; ++k)
                keep.push_back(members[k * members.size() / max_per_class]);
        }
    }
    std::sort(keep.begin(), keep.end());
    std::vector<WindowRef> out;
    out.reserve(keep.size());
    for (std::size_t i : keep) out.push_back(refs[i]);
    return out;
}

SplitPlan lopo_splits(std::span<const std::string> participants) {
    if (participants.size() < 2)
        throw std::invalid_argument("leave-one-participant-out needs at least two participants");
    std::vector<std::string> sorted(participants.begin(), participants.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("duplicate participant id in split");

    SplitPlan plan;
    for (std::size_t i = 0; i < participants.size(); ++i) {
        SplitPlan::Fold fold;
        fold.test = participants[i];
        for (std::size_t j = 0; j < participants.size(); ++j)
            if (j != i) fold.train.push_back(participants[j]);
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

std::string TrainResult::history_csv() const {
    std::string s = "epoch,loss,gesture_f1,contact_f1\n";
    char buf[128];
    for (const EpochStats& e : history) {
        std::snprintf(buf, sizeof buf, "%d,%.17g", e.epoch, e.train_loss);
        s += buf;
        if (std::isnan(e.heldout_gesture_f1)) {
            s += ",,";
        } else {
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g", e.heldout_gesture_f1,
                          e.heldout_contact_f1);
            s += buf;
        }
        s += "\n";
    }
    return s;
}

HeldoutMetrics evaluate_windows(const Model& model, std::span<const WindowedSession> sessions,
                                std::span<const WindowRef> refs, ModelMode mode,
                                ReferenceFrame::Mode frame_mode) {
    HeldoutMetrics m;
    Model::Workspace ws;
    std::vector<bool> pred_windows, truth_windows;
    pred_windows.reserve(refs.size());
    truth_windows.reserve(refs.size());
    for (const WindowRef& ref : refs) {
        const WindowedSession& s = sessions[ref.session];
        const WindowSample sample = s.realize(ref, frame_mode);
        const Prediction p = model.predict(sample.hand, sample.imu, ws, mode);
        int best = 0;
        for (int c = 1; c < kGestureClassCount; ++c)
            if (p.gesture[static_cast<std::size_t>(c)] > p.gesture[static_cast<std::size_t>(best)])
                best = c;
        m.gesture_cm.add(static_cast<int>(ref.gesture_label), best);

        std::vector<bool> frame_pred(kHandWindowLen);
        std::vector<bool> frame_truth(kHandWindowLen);
        for (int t = 0; t < kHandWindowLen; ++t) {
            frame_pred[static_cast<std::size_t>(t)] = p.contact[static_cast<std::size_t>(t)] > 0.5;
            frame_truth[static_cast<std::size_t>(t)] = ref.contact_labels[static_cast<std::size_t>(t)];
        }
        pred_windows.push_back(majority_contact(frame_pred));
        truth_windows.push_back(majority_contact(frame_truth));
    }
    m.gesture = macro_f1(m.gesture_cm);
    m.contact = window_contact_metrics(pred_windows, truth_windows);
    return m;
}

TrainResult train_loop(Model& model, std::span<const WindowedSession> sessions,
                       std::span<const WindowRef> train, std::span<const WindowRef> heldout,
                       const TrainConfig& cfg) {
    if (train.empty()) throw std::invalid_argument("train_loop: no training windows");
    if (cfg.batch_size <= 0) throw std::invalid_argument("train_loop: batch size must be positive");

    nn::AdamConfig adam_cfg;
    adam_cfg.lr = cfg.lr;
    nn::AdamState adam(model.params(), adam_cfg);
    const LossWeights weights = fit_loss_weights(train);

    TrainResult result;
    Model::Workspace ws;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0u);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        RngStream shuffle_rng(cfg.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)});
        RngStream dropout_rng(cfg.seed, {kDropoutStream, static_cast<std::uint64_t>(epoch)});
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.uniform_int(i))]);

        double loss_sum = 0.0;
        for (std::size_t batch_start = 0; batch_start < order.size();
             batch_start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t batch_n =
                std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - batch_start);
            model.zero_grads();
            for (std::size_t b = 0; b < batch_n; ++b) {
                const WindowRef& ref = train[order[batch_start + b]];
                const WindowSample sample =
                    sessions[ref.session].realize(ref, cfg.frame_mode);
                const Model::Output out = model.forward(sample.hand, sample.imu, ws, cfg.mode,
                                                        /*training=*/true, &dropout_rng);
                Model::Output grad;
                loss_sum += total_loss(out, sample.contact_labels, sample.gesture_label, weights,
                                       cfg.contact_term_weight, &grad,
                                       1.0 / static_cast<double>(batch_n));
                model.backward(ws, grad);
            }
            adam.step();
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(train.size());
        const bool eval_now = cfg.eval_every > 0 && !heldout.empty() &&
                              (epoch % cfg.eval_every == 0 || epoch == cfg.epochs);
        if (eval_now) {
            const HeldoutMetrics hm =
                evaluate_windows(model, sessions, heldout, cfg.mode, cfg.frame_mode);
            stats.heldout_gesture_f1 = hm.gesture.macro_f1;
            stats.heldout_contact_f1 = hm.contact.f1;
        }
        result.history.push_back(stats);
    }
    return result;
}

} // namespace sxr
