#include "doctest.h"

#include "sxr/realtime.hpp"
#include "sxr/rng.hpp"
#include "sxr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

using namespace sxr;

namespace {

constexpr TimeNs kMs = 1'000'000;
constexpr TimeNs kHandDt = kSecondNs / 60;

HandFrame mk_hand(TimeNs t, const Vec3& tip = Vec3(0.10, 0.08, 0.01), bool tracked = true) {
    HandFrame f;
    f.t = t;
    f.joints.assign(kHandJointCount, tip);
    f.head_position = Vec3(0.1, -0.25, 0.5);
    f.head_orientation = Quat::Identity();
    f.tracked = tracked;
    return f;
}

ImuSample mk_imu(TimeNs t, double ax = 0.1) {
    ImuSample s;
    s.t = t;
    s.accel = Vec3(ax, 0.0, 9.81);
    s.gyro = Vec3(0.0, 0.01, 0.0);
    return s;
}

// independent restatement of the paper rule for one head: a label becomes
// confirmed at the first frame where the last `needed` frames all qualify for
// it and it differs from the currently confirmed label
struct ReferenceHysteresis {
    int confirmed = 0;
    std::vector<int> quals; // qualifying label per frame, -1 when none

    std::optional<int> feed_contact(double p_touch) {
        int lab = -1;
        if (p_touch > 0.5)
            lab = 1;
        else if (1.0 - p_touch > 0.5)
            lab = 0;
        quals.push_back(lab);
        const std::size_t n = quals.size();
        if (lab >= 0 && lab != confirmed && n >= 3 && quals[n - 2] == lab && quals[n - 3] == lab) {
            confirmed = lab;
            return lab;
        }
        return std::nullopt;
    }
};

std::vector<double> gesture_dist(int hot, double p) {
    std::vector<double> g(kGestureClassCount, (1.0 - p) / (kGestureClassCount - 1));
    g[static_cast<std::size_t>(hot)] = p;
    return g;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

} // namespace

TEST_CASE("hysteresis: three-frame confirmation, reset, strict threshold") {
    SUBCASE("0.9 for frames 1-3 transitions on frame 3, not earlier") {
        HysteresisState st;
        const double probs1[2] = {0.1, 0.9};
        CHECK(!hysteresis_update(st, probs1).has_value());
        CHECK(!hysteresis_update(st, probs1).has_value());
        const auto flip = hysteresis_update(st, probs1);
        REQUIRE(flip.has_value());
        CHECK(*flip == 1);
        CHECK(st.confirmed == 1);
    }
    SUBCASE("0.9 0.4 0.9 0.9 0.9 resets at frame 2 and fires on frame 5") {
        HysteresisState st;
        const double hi[2] = {0.1, 0.9};
        const double lo[2] = {0.6, 0.4}; // 0.4 touch = qualifying no-touch frame
        CHECK(!hysteresis_update(st, hi).has_value());
        CHECK(!hysteresis_update(st, lo).has_value());
        CHECK(!hysteresis_update(st, hi).has_value());
        CHECK(!hysteresis_update(st, hi).has_value());
        const auto flip = hysteresis_update(st, hi);
        REQUIRE(flip.has_value());
        CHECK(*flip == 1);
    }
    SUBCASE("probability exactly at the threshold never counts") {
        HysteresisState st;
        const double at[2] = {0.5, 0.5};
        for (int i = 0; i < 10; ++i) {
            CHECK(!hysteresis_update(st, at).has_value());
            CHECK(st.candidate == -1);
            CHECK(st.counter == 0);
        }
        CHECK(st.confirmed == 0);
    }
    SUBCASE("delay is exactly three frames wherever the stable run starts") {
        for (int lead : {0, 1, 4, 9}) {
            HysteresisState st;
            const double lo[2] = {0.8, 0.2};
            const double hi[2] = {0.1, 0.9};
            for (int i = 0; i < lead; ++i) hysteresis_update(st, lo);
            CHECK(!hysteresis_update(st, hi).has_value());
            CHECK(!hysteresis_update(st, hi).has_value());
            CHECK(hysteresis_update(st, hi).has_value());
            // and back: exactly three qualifying no-touch frames to release
            CHECK(!hysteresis_update(st, lo).has_value());
            CHECK(!hysteresis_update(st, lo).has_value());
            const auto rel = hysteresis_update(st, lo);
            REQUIRE(rel.has_value());
            CHECK(*rel == 0);
        }
    }
    SUBCASE("counter stays within [0, needed]") {
        HysteresisState st;
        RngStream rng(41);
        for (int i = 0; i < 2000; ++i) {
            const double p = rng.next_unit();
            const double probs[2] = {1.0 - p, p};
            hysteresis_update(st, probs);
            CHECK(st.counter >= 0);
            CHECK(st.counter <= 3);
        }
    }
}

TEST_CASE("hysteresis matches a reference automaton on all short sequences") {
    // every probability sequence of length <= 6 over the quantized alphabet
    const double alphabet[] = {0.0, 0.4, 0.5, 0.6, 0.9};
    const int kA = 5;
    for (int len = 1; len <= 6; ++len) {
        std::int64_t total = 1;
        for (int i = 0; i < len; ++i) total *= kA;
        for (std::int64_t code = 0; code < total; ++code) {
            HysteresisState st;
            ReferenceHysteresis ref;
            std::int64_t c = code;
            for (int i = 0; i < len; ++i) {
                const double p = alphabet[c % kA];
                c /= kA;
                const double probs[2] = {1.0 - p, p};
                const auto got = hysteresis_update(st, probs);
                const auto want = ref.feed_contact(p);
                REQUIRE(got.has_value() == want.has_value());
                if (got) REQUIRE(*got == *want);
                REQUIRE(st.confirmed == ref.confirmed);
            }
        }
    }
}

TEST_CASE("event machine: tap pattern gives one down/move.../up and one gesture") {
    EventMachine em;
    const auto neg = gesture_dist(kNegativeIndex, 0.95);
    const auto tap = gesture_dist(static_cast<int>(GestureClass::SingleTap), 0.9);
    std::vector<TouchEvent> touch;
    std::vector<GestureEvent> gestures;
    TimeNs t = 0;
    auto run = [&](int frames, double p, const std::vector<double>& g) {
        for (int i = 0; i < frames; ++i) {
            const Vec2 pos(100.0 + 1e-3 * static_cast<double>(t / kMs), 80.0);
            auto out = em.feed(t, p, g, &pos);
            REQUIRE(out.touch.size() <= 1); // at most one touch event per frame
            for (auto& e : out.touch) touch.push_back(e);
            for (auto& e : out.gestures) gestures.push_back(e);
            t += kHandDt;
        }
    };
    run(5, 0.05, neg); // idle
    CHECK(touch.empty());
    run(6, 0.92, tap); // press + hold
    run(6, 0.05, neg); // release

    REQUIRE(gestures.size() == 1);
    CHECK(gestures[0].gesture == GestureClass::SingleTap);

    REQUIRE(touch.size() >= 3);
    CHECK(touch.front().kind == TouchEvent::Kind::Down);
    CHECK(touch.back().kind == TouchEvent::Kind::Up);
    for (std::size_t i = 1; i + 1 < touch.size(); ++i)
        CHECK(touch[i].kind == TouchEvent::Kind::Move);
    // down on the 3rd high frame (frames 5,6,7 -> t = 7 frames in)
    CHECK(touch.front().t == 7 * kHandDt);
    // up on the 3rd low frame after the press
    CHECK(touch.back().t == 13 * kHandDt);
    // moves cover every confirmed-contact frame between down and up
    CHECK(touch.size() == 2 + (13 - 7 - 1));
    // lift-off reports the last on-surface coordinates
    CHECK(touch.back().pos_mm.x() == touch[touch.size() - 2].pos_mm.x());

    SUBCASE("gesture fires once and re-arms only after a Negative spell") {
        EventMachine fresh;
        int fired = 0;
        TimeNs ft = 0;
        auto feed = [&](int frames, const std::vector<double>& g) {
            for (int i = 0; i < frames; ++i) {
                const Vec2 pos(1.0, 2.0);
                fired += static_cast<int>(fresh.feed(ft, 0.9, g, &pos).gestures.size());
                ft += kHandDt;
            }
        };
        feed(6, tap); // confirms on the 3rd frame
        CHECK(fired == 1);
        feed(8, tap); // held: candidate == confirmed, no re-fire
        CHECK(fired == 1);
        feed(3, neg); // confirmed back to Negative (no event for Negative)
        CHECK(fired == 1);
        feed(3, tap); // re-armed: fires again
        CHECK(fired == 2);
    }
}

TEST_CASE("event machine: alternation holds on random probability streams") {
    EventMachine em;
    RngStream rng(99);
    int state = 0; // 0 = up, 1 = down
    int downs = 0;
    for (int i = 0; i < 20'000; ++i) {
        std::vector<double> g(kGestureClassCount);
        double sum = 0.0;
        for (auto& v : g) {
            v = rng.next_unit();
            sum += v;
        }
        for (auto& v : g) v /= sum;
        const double p = rng.next_unit();
        const Vec2 pos(10.0, 20.0);
        const auto out = em.feed(i * kHandDt, p, g, &pos);
        REQUIRE(out.touch.size() <= 1);
        for (const TouchEvent& e : out.touch) {
            if (e.kind == TouchEvent::Kind::Down) {
                REQUIRE(state == 0);
                state = 1;
                ++downs;
            } else if (e.kind == TouchEvent::Kind::Up) {
                REQUIRE(state == 1);
                state = 0;
            } else {
                REQUIRE(state == 1); // move strictly between down and up
            }
        }
        REQUIRE(em.contact().counter <= 3);
        REQUIRE(em.gesture().counter <= 3);
    }
    CHECK(downs > 10); // the stream actually toggled
}

TEST_CASE("touch coordinates agree with the feature-space projection") {
    RngStream rng(5);
    for (int i = 0; i < 50; ++i) {
        SurfacePlane plane;
        Quat q(rng.next_gauss(), rng.next_gauss(), rng.next_gauss(), rng.next_gauss());
        plane.basis = q.normalized().toRotationMatrix();
        plane.origin = Vec3(rng.next_gauss(), rng.next_gauss(), rng.next_gauss());
        const Vec3 p(rng.next_gauss(), rng.next_gauss(), rng.next_gauss());
        const Vec2 a = touch_coordinates(&plane, p);
        const Vec2 b = project_touch_point(plane, p);
        CHECK(std::abs(a.x() - b.x()) <= 1e-12);
        CHECK(std::abs(a.y() - b.y()) <= 1e-12);
        // no plane: raw (x, y) pass-through
        const Vec2 raw = touch_coordinates(nullptr, p);
        CHECK(raw.x() == p.x());
        CHECK(raw.y() == p.y());
    }
}

TEST_CASE("event lines") {
    TouchEvent down;
    down.kind = TouchEvent::Kind::Down;
    down.t = 123'000'000;
    down.pos_mm = Vec2(10.5, 20.25);
    CHECK(event_line(down) == "event 123000000 down 10.500 20.250");

    TouchEvent up;
    up.kind = TouchEvent::Kind::Up;
    up.t = 5;
    up.has_pos = false;
    CHECK(event_line(up) == "event 5 up");

    GestureEvent g;
    g.gesture = GestureClass::SwipeLeft;
    g.t = 7;
    CHECK(event_line(g) == "event 7 gesture swipe_left");
}

TEST_CASE("engine: warm-up, time regression, untracked frames") {
    const Model model(ModelConfig::tiny());
    EngineConfig cfg;
    Engine engine(model, cfg, SurfacePlane{});

    CHECK(!engine.ready());
    CHECK_THROWS_AS(engine.step(0), std::logic_error);

    for (int i = 0; i < 60; ++i) engine.push(mk_hand(i * kHandDt));
    CHECK(!engine.ready()); // IMU buffer still empty
    for (int k = 0; k < 199; ++k) engine.push(mk_imu(k * kMasterPeriodNs));
    CHECK(!engine.ready());
    engine.push(mk_imu(199 * kMasterPeriodNs));
    CHECK(engine.ready());

    SUBCASE("time regression is rejected with state unchanged") {
        CHECK_THROWS_AS(engine.push(mk_hand(10 * kHandDt)), std::invalid_argument);
        CHECK_THROWS_AS(engine.push(mk_imu(42 * kMasterPeriodNs)), std::invalid_argument);
        CHECK(engine.state().hand_buffer.size() == 60);
        CHECK(engine.state().imu_buffer.size() == 200);
        CHECK(engine.ready());
        // equal timestamps are fine (non-decreasing contract)
        CHECK_NOTHROW(engine.push(mk_hand(59 * kHandDt)));
        CHECK_NOTHROW(engine.push(mk_imu(199 * kMasterPeriodNs)));
    }

    SUBCASE("interior untracked frames freeze the last tracked joints") {
        const Vec3 moved(0.2, 0.1, 0.02);
        engine.push(mk_hand(60 * kHandDt, moved));
        engine.push(mk_hand(61 * kHandDt, Vec3(99, 99, 99), /*tracked=*/false));
        const HandFrame& back = engine.state().hand_buffer.back();
        CHECK(back.tracked); // substituted, so featurization accepts it
        CHECK(back.joints[kIndexTip].x() == moved.x());
        CHECK(engine.ready());
    }

    SUBCASE("identical buffers stepped twice give identical predictions") {
        const StepResult a = engine.step(60 * kHandDt);
        const StepResult b = engine.step(60 * kHandDt);
        REQUIRE(a.prediction.contact.size() == b.prediction.contact.size());
        for (std::size_t i = 0; i < a.prediction.contact.size(); ++i)
            CHECK(a.prediction.contact[i] == b.prediction.contact[i]);
        for (std::size_t i = 0; i < a.prediction.gesture.size(); ++i)
            CHECK(a.prediction.gesture[i] == b.prediction.gesture[i]);
        CHECK(engine.timing().steps == 2);
        CHECK(engine.timing().total_ms() > 0.0);
        CHECK(engine.timing().max_step_ms > 0.0);
    }
}

TEST_CASE("engine: untracked frames before any tracked data block readiness") {
    const Model model(ModelConfig::tiny());
    EngineConfig cfg;
    cfg.mode = ModelMode::HandOnly;
    Engine engine(model, cfg, SurfacePlane{});

    engine.push(mk_hand(0, Vec3(1, 1, 1), /*tracked=*/false));
    for (int i = 1; i < 60; ++i) engine.push(mk_hand(i * kHandDt));
    CHECK(!engine.ready()); // leading untracked frame still in the window
    engine.push(mk_hand(60 * kHandDt));
    CHECK(engine.ready()); // it aged out
}

TEST_CASE("engine: plane wiring is explicit") {
    const Model model(ModelConfig::tiny());
    EngineConfig with_plane;
    EngineConfig no_plane;
    no_plane.use_plane = false;
    CHECK_THROWS_AS(Engine(model, no_plane, SurfacePlane{}), std::invalid_argument);
    CHECK_THROWS_AS(Engine(model, with_plane), std::invalid_argument);
    CHECK_NOTHROW(Engine(model, with_plane, SurfacePlane{}));
    CHECK_NOTHROW(Engine(model, no_plane));
}

TEST_CASE("engine: streaming featurization equals batch featurization") {
    MotionScript s;
    ScriptSegment seg;
    seg.kind = ScriptSegment::Kind::Gesture;
    seg.gesture = GestureClass::SingleTap;
    seg.location_m = Vec2(0.12, 0.08);
    seg.start = 1'200 * kMs;
    seg.duration = 150 * kMs;
    s.segments = {seg};
    const ParticipantProfile profile = ParticipantProfile::nominal(3);
    const SessionRecording rec =
        generate_session(s, profile, study_plane(SurfaceOrientation::Horizontal), 3);

    const Model model(ModelConfig::tiny());
    EngineConfig cfg;
    Engine engine(model, cfg, rec.header.plane);

    // batch oracles: gap-filled hand stream and the once-filtered IMU stream
    std::vector<HandFrame> filled = rec.hand_stream;
    for (std::size_t i = 0; i < filled.size(); ++i) {
        if (!filled[i].tracked) {
            REQUIRE(i > 0);
            filled[i].joints = filled[i - 1].joints;
            filled[i].tracked = true;
        }
    }
    const auto filtered = filter_imu_stream(rec.imu_stream, model.config().features);

    Model::Workspace ws;
    EventMachine ref_events(cfg.threshold, cfg.needed);
    std::size_t ih = 0, ii = 0;
    int steps = 0;
    while (ih < rec.hand_stream.size() || ii < rec.imu_stream.size()) {
        const bool take_imu = ii < rec.imu_stream.size() &&
                              (ih >= rec.hand_stream.size() ||
                               rec.imu_stream[ii].t <= rec.hand_stream[ih].t);
        if (take_imu) {
            engine.push(rec.imu_stream[ii]);
            ++ii;
            continue;
        }
        engine.push(rec.hand_stream[ih]);
        if (engine.ready()) {
            const TimeNs t = rec.hand_stream[ih].t;
            const StepResult r = engine.step(t);
            ++steps;

            if (steps % 7 == 1) { // spot-check full window equality
                const std::span<const HandFrame> hw(&filled[ih - 59], 60);
                const Tensor hand =
                    featurize_hands(hw, ReferenceFrame::surface(rec.header.plane));
                const std::span<const ImuFeatureSample> iw(&filtered[ii - 200], 200);
                const Tensor imu = featurize_imu(iw);
                CHECK(max_abs_diff(hand, engine.hand_window()) <= 1e-9);
                CHECK(max_abs_diff(imu, engine.imu_window()) <= 1e-9);

                const Prediction p = model.predict(hand, imu, ws, cfg.mode);
                REQUIRE(p.contact.size() == r.prediction.contact.size());
                for (std::size_t k = 0; k < p.contact.size(); ++k)
                    CHECK(std::abs(p.contact[k] - r.prediction.contact[k]) <= 1e-9);
                for (std::size_t k = 0; k < p.gesture.size(); ++k)
                    CHECK(std::abs(p.gesture[k] - r.prediction.gesture[k]) <= 1e-9);
            }

            // the engine's event stream matches a reference postprocess fed
            // with the same predictions and coordinates
            const Vec2 pos =
                project_touch_point(rec.header.plane, filled[ih].index_tip()) * 1000.0;
            REQUIRE(r.has_pos);
            CHECK(r.pos_mm.x() == pos.x());
            CHECK(r.pos_mm.y() == pos.y());
            const auto want =
                ref_events.feed(t, r.prediction.contact.back(), r.prediction.gesture, &pos);
            REQUIRE(want.touch.size() == r.touch.size());
            for (std::size_t k = 0; k < want.touch.size(); ++k) {
                CHECK(want.touch[k].kind == r.touch[k].kind);
                CHECK(want.touch[k].t == r.touch[k].t);
                CHECK(want.touch[k].pos_mm.x() == r.touch[k].pos_mm.x());
            }
            REQUIRE(want.gestures.size() == r.gestures.size());
        }
        ++ih;
    }
    CHECK(steps > 30);
}

TEST_CASE("engine: no-plane mode featurizes in the head frame") {
    MotionScript s;
    ScriptSegment seg;
    seg.kind = ScriptSegment::Kind::Hover;
    seg.location_m = Vec2(0.12, 0.08);
    seg.start = 0;
    seg.duration = 1'600 * kMs;
    s.segments = {seg};
    // clean profile: no dropout, so the raw stream is its own gap-filled form
    const SessionRecording rec = generate_session(s, ParticipantProfile::clean(13),
                                                  study_plane(SurfaceOrientation::Horizontal), 13);

    const Model model(ModelConfig::tiny());
    EngineConfig cfg;
    cfg.use_plane = false;
    Engine engine(model, cfg);

    std::size_t ih = 0, ii = 0;
    bool checked = false;
    while (ih < rec.hand_stream.size() || ii < rec.imu_stream.size()) {
        const bool take_imu = ii < rec.imu_stream.size() &&
                              (ih >= rec.hand_stream.size() ||
                               rec.imu_stream[ii].t <= rec.hand_stream[ih].t);
        if (take_imu) {
            engine.push(rec.imu_stream[ii]);
            ++ii;
            continue;
        }
        engine.push(rec.hand_stream[ih]);
        if (engine.ready() && !checked) {
            const StepResult r = engine.step(rec.hand_stream[ih].t);
            checked = true;

            const std::span<const HandFrame> hw(&rec.hand_stream[ih - 59], 60);
            HeadPose head;
            head.position = hw.front().head_position;
            head.orientation = hw.front().head_orientation;
            const Tensor hand = featurize_hands(hw, ReferenceFrame::head_frame(head));
            CHECK(max_abs_diff(hand, engine.hand_window()) <= 1e-9);

            // raw (x, y) of the head-local fingertip, in millimeters
            const HandFrame& newest = rec.hand_stream[ih];
            HeadPose newest_head;
            newest_head.position = newest.head_position;
            newest_head.orientation = newest.head_orientation;
            const Vec3 local = newest_head.to_local(newest.index_tip());
            REQUIRE(r.has_pos);
            CHECK(r.pos_mm.x() == doctest::Approx(local.x() * 1000.0).epsilon(1e-12));
            CHECK(r.pos_mm.y() == doctest::Approx(local.y() * 1000.0).epsilon(1e-12));
        }
        ++ih;
    }
    CHECK(checked);
}

TEST_CASE("engine: imu-only never reads hand buffers") {
    MotionScript s;
    ScriptSegment seg;
    seg.kind = ScriptSegment::Kind::Gesture;
    seg.gesture = GestureClass::DoubleTap;
    seg.location_m = Vec2(0.12, 0.08);
    seg.start = 1'100 * kMs;
    seg.duration = 120 * kMs;
    s.segments = {seg};
    ParticipantProfile profile = ParticipantProfile::clean(19);
    profile.impulse_gain = 5.0;
    profile.accel_noise = 0.05;
    const SessionRecording rec =
        generate_session(s, profile, study_plane(SurfaceOrientation::Horizontal), 19);

    const Model model(ModelConfig::tiny());
    EngineConfig cfg;
    cfg.mode = ModelMode::ImuOnly;
    Engine clean_engine(model, cfg, rec.header.plane);
    Engine poisoned(model, cfg, rec.header.plane);

    TimeNs poison_t = 0;
    int steps = 0;
    for (std::size_t k = 0; k < rec.imu_stream.size(); ++k) {
        clean_engine.push(rec.imu_stream[k]);
        poisoned.push(rec.imu_stream[k]);
        if (k % 2 == 0) { // poison: garbage hand frames interleaved
            poisoned.push(mk_hand(poison_t, Vec3(1e6, -1e6, 1e6)));
            poison_t += kHandDt;
        }
        if (k % 10 % 3 == 0 && k % 10 != 9 && clean_engine.ready()) {
            CHECK(poisoned.ready()); // ready after 200 IMU samples alone
            const StepResult a = clean_engine.step(rec.imu_stream[k].t);
            const StepResult b = poisoned.step(rec.imu_stream[k].t);
            ++steps;
            CHECK(!a.has_pos);
            REQUIRE(a.prediction.contact.size() == b.prediction.contact.size());
            for (std::size_t i = 0; i < a.prediction.contact.size(); ++i)
                CHECK(a.prediction.contact[i] == b.prediction.contact[i]);
            for (std::size_t i = 0; i < a.prediction.gesture.size(); ++i)
                CHECK(a.prediction.gesture[i] == b.prediction.gesture[i]);
        }
    }
    CHECK(steps > 50);

    // the inactive modality's tensor stays exactly zero
    double hand_max = 0.0;
    for (std::int64_t i = 0; i < poisoned.hand_window().size(); ++i)
        hand_max = std::max(hand_max, std::abs(poisoned.hand_window().data()[i]));
    CHECK(hand_max == 0.0);
}

TEST_CASE("engine: hand-only mode leaves the IMU tensor zero") {
    const Model model(ModelConfig::tiny());
    EngineConfig cfg;
    cfg.mode = ModelMode::HandOnly;
    Engine engine(model, cfg, SurfacePlane{});
    for (int i = 0; i < 60; ++i) engine.push(mk_hand(i * kHandDt));
    CHECK(engine.ready()); // no IMU needed
    engine.step(59 * kHandDt);
    double imu_max = 0.0;
    for (std::int64_t i = 0; i < engine.imu_window().size(); ++i)
        imu_max = std::max(imu_max, std::abs(engine.imu_window().data()[i]));
    CHECK(imu_max == 0.0);
}

TEST_CASE("replay: step cadence follows the active modality") {
    MotionScript s;
    ScriptSegment seg;
    seg.kind = ScriptSegment::Kind::Hover;
    seg.location_m = Vec2(0.12, 0.08);
    seg.start = 0;
    seg.duration = 2'000 * kMs;
    s.segments = {seg};
    const SessionRecording rec = generate_session(s, ParticipantProfile::nominal(23),
                                                  study_plane(SurfaceOrientation::Horizontal), 23);
    const Model model(ModelConfig::tiny());

    SUBCASE("multimodal: one step per hand frame once both buffers fill") {
        EngineConfig cfg;
        const ReplayResult run = replay_session(rec, model, cfg);
        // first ready hand frame: needs 200 IMU samples pushed first
        int expected = 0;
        std::size_t imu_before = 0;
        for (const HandFrame& f : rec.hand_stream) {
            while (imu_before < rec.imu_stream.size() && rec.imu_stream[imu_before].t <= f.t)
                ++imu_before;
            const std::size_t hand_idx = static_cast<std::size_t>(&f - rec.hand_stream.data());
            if (hand_idx + 1 >= 60 && imu_before >= 200) ++expected;
        }
        CHECK(run.steps == expected);
        CHECK(run.timing.steps == run.steps);
    }
    SUBCASE("imu-only: every 3rd/4th IMU sample") {
        EngineConfig cfg;
        cfg.mode = ModelMode::ImuOnly;
        const ReplayResult run = replay_session(rec, model, cfg);
        int expected = 0;
        for (std::size_t k = 199; k < rec.imu_stream.size(); ++k)
            if (k % 10 % 3 == 0 && k % 10 != 9) ++expected;
        CHECK(run.steps == expected);
        // about 60 Hz: 3 steps per 10 samples
        CHECK(run.steps >= static_cast<int>((rec.imu_stream.size() - 200) * 3 / 10) - 1);
    }
}

TEST_CASE("latency report counts misses instead of inventing latencies") {
    // an untrained tiny model will not detect anything reliably; the report
    // must then show misses, not fabricated latency numbers
    MotionScript s;
    ScriptSegment seg;
    seg.kind = ScriptSegment::Kind::Gesture;
    seg.gesture = GestureClass::SingleTap;
    seg.location_m = Vec2(0.12, 0.08);
    seg.start = 1'200 * kMs;
    seg.duration = 150 * kMs;
    s.segments = {seg};
    const SessionRecording rec = generate_session(s, ParticipantProfile::clean(29),
                                                  study_plane(SurfaceOrientation::Horizontal), 29);
    const Model model(ModelConfig::tiny());
    EngineConfig cfg;
    const LatencyReport rep = latency_report(rec, model, cfg);
    CHECK(rep.steps > 0);
    CHECK(rep.timing.steps == rep.steps);
    if (!rep.stats.median_onset_ms.has_value()) CHECK(rep.stats.miss_rate == 1.0);
}
