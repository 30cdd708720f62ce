#include "sxr/realtime.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <stdexcept>
#include <utility>

namespace sxr {

std::optional<int> hysteresis_update(HysteresisState& state, std::span<const double> probs,
                                     double threshold, int needed) {
    if (probs.empty()) throw std::invalid_argument("hysteresis needs a probability vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best]) best = i;

    if (probs[best] > threshold) { // strictly above: 0.5 exactly does not count
        if (static_cast<int>(best) == state.candidate) {
            state.counter = std::min(state.counter + 1, needed);
        } else {
            state.candidate = static_cast<int>(best);
            state.counter = 1;
        }
    } else {
        state.candidate = -1;
        state.counter = 0;
    }

    if (state.counter >= needed && state.candidate != state.confirmed) {
        state.confirmed = state.candidate;
        return state.confirmed;
    }
    return std::nullopt;
}

Vec2 touch_coordinates(const SurfacePlane* plane, const Vec3& fingertip) {
    if (plane) return project_touch_point(*plane, fingertip);
    return Vec2(fingertip.x(), fingertip.y());
}

std::string event_line(const TouchEvent& e) {
    const char* kind = e.kind == TouchEvent::Kind::Down   ? "down"
                       : e.kind == TouchEvent::Kind::Move ? "move"
                                                          : "up";
    std::string line = "event " + std::to_string(e.t) + " " + kind;
    if (e.has_pos) {
        char buf[64];
        std::snprintf(buf, sizeof buf, " %.3f %.3f", e.pos_mm.x(), e.pos_mm.y());
        line += buf;
    }
    return line;
}

std::string event_line(const GestureEvent& e) {
    return "event " + std::to_string(e.t) + " gesture " + std::string(gesture_name(e.gesture));
}

// ---------------------------------------------------------------------------
// EventMachine
// ---------------------------------------------------------------------------

EventMachine::EventMachine(double threshold, int needed) : threshold_(threshold), needed_(needed) {
    contact_.confirmed = 0;
    gesture_.confirmed = kNegativeIndex;
}

EventMachine::Out EventMachine::feed(TimeNs t, double p_touch,
                                     std::span<const double> gesture_probs, const Vec2* pos_mm) {
    Out out;
    const double contact_probs[2] = {1.0 - p_touch, p_touch};
    const std::optional<int> contact_flip =
        hysteresis_update(contact_, contact_probs, threshold_, needed_);
    const std::optional<int> gesture_flip =
        hysteresis_update(gesture_, gesture_probs, threshold_, needed_);

    if (contact_flip && *contact_flip == 1) {
        in_contact_ = true;
        touch_start_ = t;
        TouchEvent e;
        e.kind = TouchEvent::Kind::Down;
        e.t = t;
        e.has_pos = pos_mm != nullptr;
        if (pos_mm) {
            e.pos_mm = *pos_mm;
            last_pos_ = *pos_mm;
            has_last_pos_ = true;
        }
        out.touch.push_back(e);
    } else if (contact_flip && *contact_flip == 0) {
        in_contact_ = false;
        TouchEvent e;
        e.kind = TouchEvent::Kind::Up;
        e.t = t;
        e.has_pos = has_last_pos_; // lift-off reports the last on-surface point
        e.pos_mm = last_pos_;
        out.touch.push_back(e);
    } else if (in_contact_) {
        TouchEvent e;
        e.kind = TouchEvent::Kind::Move;
        e.t = t;
        e.has_pos = pos_mm != nullptr;
        if (pos_mm) {
            e.pos_mm = *pos_mm;
            last_pos_ = *pos_mm;
            has_last_pos_ = true;
        }
        out.touch.push_back(e);
    }

    if (gesture_flip && *gesture_flip != kNegativeIndex)
        out.gestures.push_back({static_cast<GestureClass>(*gesture_flip), t});
    return out;
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

Engine::Engine(const Model& model, const EngineConfig& cfg, const SurfacePlane& plane)
    : model_(&model),
      cfg_(cfg),
      has_plane_(true),
      plane_(plane),
      hand_tensor_({kHandWindowLen, kHandFeatures, 3, kHandFingers}),
      imu_tensor_({kImuWindowLen, kImuChannels, kImuComponents}) {
    if (!cfg.use_plane)
        throw std::invalid_argument("plane given but use_plane is off; use the plane-less engine");
    state_.filter = ImuFilterBank(model.config().features);
    state_.events = EventMachine(cfg.threshold, cfg.needed);
    hand_scratch_.reserve(kHandWindowLen);
    imu_scratch_.reserve(kImuWindowLen);
}

Engine::Engine(const Model& model, const EngineConfig& cfg)
    : model_(&model),
      cfg_(cfg),
      hand_tensor_({kHandWindowLen, kHandFeatures, 3, kHandFingers}),
      imu_tensor_({kImuWindowLen, kImuChannels, kImuComponents}) {
    if (cfg.use_plane) throw std::invalid_argument("use_plane engine needs a registered plane");
    state_.filter = ImuFilterBank(model.config().features);
    state_.events = EventMachine(cfg.threshold, cfg.needed);
    hand_scratch_.reserve(kHandWindowLen);
    imu_scratch_.reserve(kImuWindowLen);
}

void Engine::push(const HandFrame& frame) {
    if (have_hand_t_ && frame.t < last_hand_t_)
        throw std::invalid_argument("hand frame time regression");
    if (frame.joints.size() != static_cast<std::size_t>(kHandJointCount))
        throw std::invalid_argument("hand frame must carry " + std::to_string(kHandJointCount) +
                                    " joints");
    HandFrame f = frame;
    if (f.tracked) {
        last_tracked_joints_ = f.joints;
        have_tracked_ = true;
    } else if (have_tracked_) {
        f.joints = last_tracked_joints_; // tracker freeze
        f.tracked = true;
    } // untracked frames before any tracked data stay as-is and block readiness
    state_.hand_buffer.push_back(std::move(f));
    if (state_.hand_buffer.size() > static_cast<std::size_t>(kHandWindowLen))
        state_.hand_buffer.pop_front();
    last_hand_t_ = frame.t;
    have_hand_t_ = true;
}

void Engine::push(const ImuSample& sample) {
    if (have_imu_t_ && sample.t < last_imu_t_)
        throw std::invalid_argument("IMU sample time regression");
    const Vec6 v = normalize_imu(sample, model_->config().features); // validates first
    state_.imu_buffer.push_back(state_.filter.push(v));
    if (state_.imu_buffer.size() > static_cast<std::size_t>(kImuWindowLen))
        state_.imu_buffer.pop_front();
    last_imu_t_ = sample.t;
    have_imu_t_ = true;
}

bool Engine::ready() const {
    const bool imu_ok = state_.imu_buffer.size() >= static_cast<std::size_t>(kImuWindowLen);
    bool hand_ok = state_.hand_buffer.size() >= static_cast<std::size_t>(kHandWindowLen);
    if (hand_ok)
        for (const HandFrame& f : state_.hand_buffer)
            if (!f.tracked) {
                hand_ok = false;
                break;
            }
    switch (cfg_.mode) {
        case ModelMode::Multi: return hand_ok && imu_ok;
        case ModelMode::HandOnly: return hand_ok;
        case ModelMode::ImuOnly: return imu_ok;
    }
    return false;
}

StepResult Engine::step(TimeNs now) {
    if (!ready()) throw std::logic_error("engine not ready");
    using clock = std::chrono::steady_clock;
    auto ms = [](clock::time_point a, clock::time_point b) {
        return std::chrono::duration<double, std::milli>(b - a).count();
    };
    const auto t0 = clock::now();

    if (cfg_.mode != ModelMode::ImuOnly) {
        hand_scratch_.assign(state_.hand_buffer.begin(), state_.hand_buffer.end());
        ReferenceFrame ref;
        if (cfg_.use_plane) {
            ref = ReferenceFrame::surface(plane_);
        } else {
            HeadPose head;
            head.position = hand_scratch_.front().head_position;
            head.orientation = hand_scratch_.front().head_orientation;
            ref = ReferenceFrame::head_frame(head); // featurize swaps in per-frame poses
        }
        hand_tensor_ = featurize_hands(hand_scratch_, ref);
    } // imu-only: hand_tensor_ stays all-zero and hand buffers are never read
    if (cfg_.mode != ModelMode::HandOnly) {
        imu_scratch_.assign(state_.imu_buffer.begin(), state_.imu_buffer.end());
        imu_tensor_ = featurize_imu(imu_scratch_);
    }
    const auto t1 = clock::now();

    StepResult result;
    result.prediction = model_->predict(hand_tensor_, imu_tensor_, ws_, cfg_.mode);
    const auto t2 = clock::now();

    bool has_pos = false;
    Vec2 pos_mm = Vec2::Zero();
    if (cfg_.mode != ModelMode::ImuOnly) {
        const HandFrame& newest = state_.hand_buffer.back();
        if (cfg_.use_plane) {
            pos_mm = touch_coordinates(&plane_, newest.index_tip()) * 1000.0;
        } else {
            HeadPose head;
            head.position = newest.head_position;
            head.orientation = newest.head_orientation;
            pos_mm = touch_coordinates(nullptr, head.to_local(newest.index_tip())) * 1000.0;
        }
        has_pos = true;
    }
    EventMachine::Out out = state_.events.feed(now, result.prediction.contact.back(),
                                               result.prediction.gesture,
                                               has_pos ? &pos_mm : nullptr);
    result.touch = std::move(out.touch);
    result.gestures = std::move(out.gestures);
    result.pos_mm = pos_mm;
    result.has_pos = has_pos;
    const auto t3 = clock::now();

    timing_.featurize_ms += ms(t0, t1);
    timing_.forward_ms += ms(t1, t2);
    timing_.postprocess_ms += ms(t2, t3);
    timing_.max_step_ms = std::max(timing_.max_step_ms, ms(t0, t3));
    ++timing_.steps;
    return result;
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

ReplayResult replay_session(const SessionRecording& recording, const Model& model,
                            const EngineConfig& cfg) {
    Engine engine = cfg.use_plane ? Engine(model, cfg, recording.header.plane)
                                  : Engine(model, cfg);
    ReplayResult result;
    auto do_step = [&](TimeNs t) {
        StepResult r = engine.step(t);
        for (const TouchEvent& e : r.touch) {
            result.lines.push_back(event_line(e));
            result.touch.push_back(e);
        }
        for (const GestureEvent& e : r.gestures) {
            result.lines.push_back(event_line(e));
            result.gestures.push_back(e);
        }
        ++result.steps;
    };

    const auto& hand = recording.hand_stream;
    const auto& imu = recording.imu_stream;
    std::size_t ih = 0, ii = 0;
    while (ih < hand.size() || ii < imu.size()) {
        // IMU first on ties so each step sees every sample at or before its time
        const bool take_imu =
            ii < imu.size() && (ih >= hand.size() || imu[ii].t <= hand[ih].t);
        if (take_imu) {
            engine.push(imu[ii]);
            // about 60 Hz from the 200 Hz stream: indices 0, 3, 6 mod 10
            if (cfg.mode == ModelMode::ImuOnly && ii % 10 % 3 == 0 && ii % 10 != 9 &&
                engine.ready())
                do_step(imu[ii].t);
            ++ii;
        } else {
            engine.push(hand[ih]);
            if (cfg.mode != ModelMode::ImuOnly && engine.ready()) do_step(hand[ih].t);
            ++ih;
        }
    }
    result.timing = engine.timing();
    return result;
}

LatencyReport latency_report(const SessionRecording& recording, const Model& model,
                             const EngineConfig& cfg) {
    const ReplayResult run = replay_session(recording, model, cfg);
    std::vector<TimeNs> det_down, det_up;
    for (const TouchEvent& e : run.touch) {
        if (e.kind == TouchEvent::Kind::Down) det_down.push_back(e.t);
        if (e.kind == TouchEvent::Kind::Up) det_up.push_back(e.t);
    }
    std::vector<TimeNs> truth_down, truth_up;
    for (const auto& [s, e] : contact_intervals(recording)) {
        truth_down.push_back(s);
        truth_up.push_back(e);
    }
    LatencyReport report;
    report.stats = latency_stats(det_down, det_up, truth_down, truth_up);
    report.timing = run.timing;
    report.steps = run.steps;
    return report;
}

} // namespace sxr
