#include "doctest.h"

#include "sxr/eval.hpp"
#include "sxr/features.hpp"
#include "sxr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

using namespace sxr;

namespace {

constexpr TimeNs kMs = 1'000'000;

bool vec_eq(const Vec3& a, const Vec3& b) {
    return a.x() == b.x() && a.y() == b.y() && a.z() == b.z();
}

ScriptSegment gesture_seg(GestureClass g, double x_m, double y_m, TimeNs start, TimeNs dwell) {
    ScriptSegment s;
    s.kind = ScriptSegment::Kind::Gesture;
    s.gesture = g;
    s.location_m = Vec2(x_m, y_m);
    s.start = start;
    s.duration = dwell;
    return s;
}

// summed squared 32+ Hz band accel over sample indices [a, b)
double hi_band_energy(const std::vector<ImuFeatureSample>& f, std::size_t a, std::size_t b) {
    double e = 0.0;
    for (std::size_t k = a; k < b && k < f.size(); ++k)
        for (int ch = 0; ch < 3; ++ch) e += f[k].at(2, ch) * f[k].at(2, ch);
    return e;
}

template <typename Fn>
std::string thrown_message(Fn&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

void require_identical(const SessionRecording& a, const SessionRecording& b) {
    REQUIRE(a.header.participant == b.header.participant);
    REQUIRE(a.header.orientation == b.header.orientation);
    REQUIRE(vec_eq(a.header.plane.origin, b.header.plane.origin));
    REQUIRE((a.header.plane.basis.array() == b.header.plane.basis.array()).all());
    REQUIRE(a.hand_stream.size() == b.hand_stream.size());
    for (std::size_t i = 0; i < a.hand_stream.size(); ++i) {
        const HandFrame& fa = a.hand_stream[i];
        const HandFrame& fb = b.hand_stream[i];
        REQUIRE(fa.t == fb.t);
        REQUIRE(fa.tracked == fb.tracked);
        REQUIRE(vec_eq(fa.head_position, fb.head_position));
        REQUIRE(fa.head_orientation.coeffs() == fb.head_orientation.coeffs());
        for (int j = 0; j < kHandJointCount; ++j)
            REQUIRE(vec_eq(fa.joints[static_cast<std::size_t>(j)],
                           fb.joints[static_cast<std::size_t>(j)]));
    }
    REQUIRE(a.imu_stream.size() == b.imu_stream.size());
    for (std::size_t i = 0; i < a.imu_stream.size(); ++i) {
        REQUIRE(a.imu_stream[i].t == b.imu_stream[i].t);
        REQUIRE(vec_eq(a.imu_stream[i].accel, b.imu_stream[i].accel));
        REQUIRE(vec_eq(a.imu_stream[i].gyro, b.imu_stream[i].gyro));
    }
    REQUIRE(a.truth_stream.size() == b.truth_stream.size());
    for (std::size_t i = 0; i < a.truth_stream.size(); ++i) {
        const GroundTruthEvent& ea = a.truth_stream[i];
        const GroundTruthEvent& eb = b.truth_stream[i];
        REQUIRE(ea.t == eb.t);
        REQUIRE(ea.kind == eb.kind);
        REQUIRE(ea.gesture.has_value() == eb.gesture.has_value());
        if (ea.gesture) REQUIRE(*ea.gesture == *eb.gesture);
        REQUIRE(ea.pos_mm.has_value() == eb.pos_mm.has_value());
        if (ea.pos_mm) {
            REQUIRE(ea.pos_mm->x() == eb.pos_mm->x());
            REQUIRE(ea.pos_mm->y() == eb.pos_mm->y());
        }
    }
}

} // namespace

TEST_CASE("gesture trajectories enforce their duration bounds") {
    RngStream rng(3);
    const Vec2 loc(0.12, 0.08);
    CHECK_THROWS_AS(gesture_trajectory(GestureClass::SingleTap, loc, 79 * kMs, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(gesture_trajectory(GestureClass::SingleTap, loc, 201 * kMs, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(gesture_trajectory(GestureClass::SwipeLeft, loc, 149 * kMs, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(gesture_trajectory(GestureClass::SwipeUp, loc, 401 * kMs, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(gesture_trajectory(GestureClass::PinchIn, loc, 299 * kMs, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(gesture_trajectory(GestureClass::PinchOut, loc, 601 * kMs, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(gesture_trajectory(GestureClass::Negative, loc, 300 * kMs, rng),
                    std::invalid_argument);
    CHECK_NOTHROW(gesture_trajectory(GestureClass::SingleTap, loc, 80 * kMs, rng));
    CHECK_NOTHROW(gesture_trajectory(GestureClass::PinchOut, loc, 600 * kMs, rng));
}

TEST_CASE("single tap: one contact interval matching the gesture interval") {
    RngStream rng(11);
    const Vec2 loc(0.10, 0.09);
    const TimeNs dwell = 150 * kMs;
    TrueMotion m = gesture_trajectory(GestureClass::SingleTap, loc, dwell, rng);

    REQUIRE(m.contacts().size() == 1);
    REQUIRE(m.gestures().size() == 1);
    const auto [on, off] = m.contacts().front();
    CHECK(off - on == dwell);
    CHECK(m.gestures().front().start == on);
    CHECK(m.gestures().front().end == off);
    CHECK(m.gestures().front().gesture == GestureClass::SingleTap);

    // fingertip is on the surface exactly while in contact, hovering otherwise
    CHECK(m.at(on).index.z() == 0.0);
    CHECK(m.at((on + off) / 2).index.z() == 0.0);
    CHECK(m.at((on + off) / 2).index.x() == doctest::Approx(loc.x()).epsilon(1e-12));
    CHECK(m.at(0).index.z() == doctest::Approx(0.05));
    CHECK(m.at(m.end_time()).index.z() == doctest::Approx(0.05));
}

TEST_CASE("double tap: two contacts separated by a 100-250 ms gap") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        RngStream rng(seed);
        TrueMotion m =
            gesture_trajectory(GestureClass::DoubleTap, Vec2(0.13, 0.07), 100 * kMs, rng);
        REQUIRE(m.contacts().size() == 2);
        REQUIRE(m.gestures().size() == 1);
        const TimeNs gap = m.contacts()[1].first - m.contacts()[0].second;
        CHECK(gap >= 100 * kMs);
        CHECK(gap <= 250 * kMs);
        CHECK(m.gestures().front().start == m.contacts()[0].first);
        CHECK(m.gestures().front().end == m.contacts()[1].second);
        // the finger lifts between the taps but stays below hover height
        const TimeNs mid = m.contacts()[0].second + gap / 2;
        CHECK(m.at(mid).index.z() > 0.005);
        CHECK(m.at(mid).index.z() < 0.03);
    }
}

TEST_CASE("swipes sweep 4.5-7 cm along their named direction") {
    const struct {
        GestureClass g;
        Vec2 dir;
    } cases[] = {
        {GestureClass::SwipeLeft, Vec2(-1, 0)},
        {GestureClass::SwipeRight, Vec2(1, 0)},
        {GestureClass::SwipeUp, Vec2(0, 1)},
        {GestureClass::SwipeDown, Vec2(0, -1)},
    };
    for (const auto& c : cases) {
        RngStream rng(17);
        TrueMotion m = gesture_trajectory(c.g, Vec2(0.127, 0.083), 250 * kMs, rng);
        REQUIRE(m.contacts().size() == 1);
        const auto [on, off] = m.contacts().front();
        const Vec3 d = m.at(off).index - m.at(on).index;
        const double along = d.x() * c.dir.x() + d.y() * c.dir.y();
        const double across = d.x() * c.dir.y() + d.y() * c.dir.x();
        CHECK(along >= 0.045);
        CHECK(along <= 0.070);
        CHECK(std::abs(across) < 1e-12);
        CHECK(m.at(on).index.z() == 0.0);
        CHECK(m.at((on + off) / 2).index.z() == 0.0);
        CHECK(m.at(off).index.z() == 0.0);
    }
}

TEST_CASE("pinches change the tip separation monotonically by 3.2-4.5 cm") {
    for (GestureClass g : {GestureClass::PinchIn, GestureClass::PinchOut}) {
        RngStream rng(23);
        TrueMotion m = gesture_trajectory(g, Vec2(0.127, 0.083), 400 * kMs, rng);
        REQUIRE(m.contacts().size() == 1);
        const auto [on, off] = m.contacts().front();
        auto sep = [&](TimeNs t) { return (m.at(t).index - m.at(t).thumb).norm(); };

        const double s0 = sep(on);
        const double s1 = sep(off);
        const double delta = g == GestureClass::PinchIn ? s0 - s1 : s1 - s0;
        CHECK(delta >= 0.032 - 1e-12);
        CHECK(delta <= 0.045 + 1e-12);
        const double start_sep = g == GestureClass::PinchIn ? 0.075 : 0.034;
        CHECK(s0 == doctest::Approx(start_sep).epsilon(1e-9));

        double prev = s0;
        for (TimeNs t = on + 2 * kMs; t < off; t += 2 * kMs) {
            const double s = sep(t);
            if (g == GestureClass::PinchIn)
                CHECK(s < prev);
            else
                CHECK(s > prev);
            CHECK(m.at(t).index.z() == 0.0);
            CHECK(m.at(t).thumb.z() == 0.0);
            prev = s;
        }
    }
}

TEST_CASE("composite motion is C1: no velocity jumps at 1 kHz") {
    RngStream rng(7);
    TrueMotion m;
    m.set_start(rest_pose(Vec2(0.10, 0.08)));
    const TimeNs dwell[] = {120 * kMs, 140 * kMs, 200 * kMs, 250 * kMs,
                            300 * kMs, 180 * kMs, 400 * kMs, 450 * kMs};
    for (int c = 0; c < kGestureClassCount - 1; ++c) {
        const Vec2 loc(0.10 + 0.005 * c, 0.08 + 0.003 * (c % 3));
        append_gesture(m, static_cast<GestureClass>(c), loc, dwell[c], rng);
    }
    m.hold(200 * kMs);

    const TimeNs step = 1 * kMs;
    const double dt = 1e-9 * static_cast<double>(step);
    auto pos = [&](TimeNs t) { return m.at(t); };
    double max_dv = 0.0;
    TruePose p0 = pos(0), p1 = pos(step);
    Vec3 v_prev[3] = {(p1.index - p0.index) / dt, (p1.thumb - p0.thumb) / dt,
                      (p1.wrist - p0.wrist) / dt};
    for (TimeNs t = step; t + step <= m.end_time(); t += step) {
        const TruePose a = pos(t);
        const TruePose b = pos(t + step);
        const Vec3 v[3] = {(b.index - a.index) / dt, (b.thumb - a.thumb) / dt,
                           (b.wrist - a.wrist) / dt};
        for (int k = 0; k < 3; ++k) {
            max_dv = std::max(max_dv, (v[k] - v_prev[k]).norm());
            v_prev[k] = v[k];
        }
    }
    // smooth phases keep per-millisecond velocity changes far below any
    // discontinuity a broken phase seam would introduce
    CHECK(max_dv < 0.08);
}

TEST_CASE("stationary wrist: IMU reads exactly gravity in plane axes") {
    ScriptSegment seg;
    seg.kind = ScriptSegment::Kind::Hover;
    seg.location_m = Vec2(0.127, 0.083);
    seg.start = 0;
    seg.duration = 2'000 * kMs;
    MotionScript script;
    script.segments = {seg};

    for (SurfaceOrientation o : {SurfaceOrientation::Horizontal, SurfaceOrientation::Vertical}) {
        const SurfacePlane plane = study_plane(o);
        const SessionRecording rec =
            generate_session(script, ParticipantProfile::clean(5), plane, 5, "p00", o);
        const Vec3 expect = plane.basis.transpose() * Vec3(0, 0, 9.81);
        REQUIRE(!rec.imu_stream.empty());
        for (const ImuSample& s : rec.imu_stream) {
            CHECK((s.accel - expect).norm() < 1e-12);
            CHECK(s.gyro.norm() < 1e-12);
        }
    }
}

TEST_CASE("contact onsets inject 32+ Hz accel energy") {
    MotionScript script;
    script.segments = {gesture_seg(GestureClass::SingleTap, 0.10, 0.08, 1'000 * kMs, 120 * kMs),
                       gesture_seg(GestureClass::SingleTap, 0.14, 0.09, 2'400 * kMs, 120 * kMs)};
    ParticipantProfile profile = ParticipantProfile::clean(9);
    profile.impulse_gain = 4.0;
    const SessionRecording rec =
        generate_session(script, profile, study_plane(SurfaceOrientation::Horizontal), 9);

    const auto filtered = filter_imu_stream(rec.imu_stream, FeatureConfig{});
    const auto contacts = contact_intervals(rec);
    REQUIRE(contacts.size() == 2);
    for (const auto& [on, off] : contacts) {
        const auto k_on = static_cast<std::size_t>(on / kMasterPeriodNs);
        const double before = hi_band_energy(filtered, k_on - 20, k_on);
        const double after = hi_band_energy(filtered, k_on, k_on + 20);
        CHECK(after >= 5.0 * before);
        CHECK(after > 0.0);
    }
}

TEST_CASE("zero-noise tracking reproduces the true joints exactly") {
    RngStream motion_rng(31);
    TrueMotion m = gesture_trajectory(GestureClass::SwipeRight, Vec2(0.11, 0.08), 300 * kMs,
                                      motion_rng);
    const SurfacePlane plane = study_plane(SurfaceOrientation::Horizontal);
    const ParticipantProfile profile = ParticipantProfile::clean(4);
    RngStream rng(4, {0x20});
    const auto frames = simulate_tracking(m, profile, plane, m.end_time(), rng);

    REQUIRE(frames.size() == static_cast<std::size_t>(m.end_time() / (kSecondNs / 60)) + 1);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const TimeNs t = static_cast<TimeNs>(i) * kSecondNs / 60;
        REQUIRE(frames[i].t == t);
        REQUIRE(frames[i].tracked);
        const auto joints = synth_joints(m.at(t), profile.hand_scale);
        for (int j = 0; j < kHandJointCount; ++j)
            CHECK(vec_eq(frames[i].joints[static_cast<std::size_t>(j)],
                         plane.to_world(joints[static_cast<std::size_t>(j)])));
        CHECK(std::abs(frames[i].head_orientation.norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("tracking bias shifts observations along plane axes") {
    RngStream motion_rng(12);
    TrueMotion m =
        gesture_trajectory(GestureClass::SingleTap, Vec2(0.12, 0.09), 150 * kMs, motion_rng);
    const SurfacePlane plane = study_plane(SurfaceOrientation::Vertical);
    ParticipantProfile profile = ParticipantProfile::clean(4);
    profile.tracking_bias_m = Vec3(0.0, 0.0, 0.008); // 8 mm off the surface
    RngStream rng(4, {0x20});
    const auto frames = simulate_tracking(m, profile, plane, m.end_time(), rng);

    const auto [on, off] = m.contacts().front();
    int inside = 0;
    for (const HandFrame& f : frames) {
        if (f.t <= on || f.t >= off) continue;
        ++inside;
        CHECK(plane.to_local(f.index_tip()).z() == doctest::Approx(0.008).epsilon(1e-9));
    }
    CHECK(inside >= 7); // 150 ms dwell at 60 Hz
}

TEST_CASE("tracking jitter matches the configured stationary statistics") {
    TrueMotion m;
    m.set_start(rest_pose(Vec2(0.127, 0.083)));
    m.hold(200 * kSecondNs);
    const SurfacePlane plane = study_plane(SurfaceOrientation::Horizontal);
    ParticipantProfile profile = ParticipantProfile::clean(77);
    profile.jitter_sigma_m = 0.003;
    RngStream rng(77, {0x20});
    const auto frames = simulate_tracking(m, profile, plane, m.end_time(), rng);
    REQUIRE(frames.size() > 11'000);

    const auto truth = synth_joints(m.at(0), 1.0);
    const std::size_t skip = 100; // burn-in of the jitter low-pass
    double var_sum = 0.0;
    int var_n = 0;
    for (int j = 0; j < kHandJointCount; ++j) {
        const Vec3 base = plane.to_world(truth[static_cast<std::size_t>(j)]);
        for (int ax = 0; ax < 3; ++ax) {
            double mean = 0.0;
            for (std::size_t i = skip; i < frames.size(); ++i)
                mean += frames[i].joints[static_cast<std::size_t>(j)][ax] - base[ax];
            mean /= static_cast<double>(frames.size() - skip);
            double var = 0.0;
            for (std::size_t i = skip; i < frames.size(); ++i) {
                const double r = frames[i].joints[static_cast<std::size_t>(j)][ax] - base[ax] - mean;
                var += r * r;
            }
            var_sum += var / static_cast<double>(frames.size() - skip);
            ++var_n;
        }
    }
    const double pooled_std = std::sqrt(var_sum / var_n);
    CHECK(pooled_std == doctest::Approx(0.003).epsilon(0.05));

    // lag-1 autocorrelation of the low-passed jitter sits near the 0.6 pole
    const Vec3 base = plane.to_world(truth[kIndexTip]);
    double num = 0.0, den = 0.0, mean = 0.0;
    for (std::size_t i = skip; i < frames.size(); ++i)
        mean += frames[i].joints[kIndexTip].x() - base.x();
    mean /= static_cast<double>(frames.size() - skip);
    for (std::size_t i = skip; i < frames.size(); ++i) {
        const double r = frames[i].joints[kIndexTip].x() - base.x() - mean;
        den += r * r;
        if (i + 1 < frames.size()) {
            const double rn = frames[i + 1].joints[kIndexTip].x() - base.x() - mean;
            num += r * rn;
        }
    }
    CHECK(num / den == doctest::Approx(0.6).epsilon(0.08));
}

TEST_CASE("dropout freezes the previously observed joints") {
    RngStream motion_rng(40);
    TrueMotion m =
        gesture_trajectory(GestureClass::SwipeLeft, Vec2(0.13, 0.08), 350 * kMs, motion_rng);
    ParticipantProfile profile = ParticipantProfile::clean(8);
    profile.dropout_rate = 0.2;
    profile.jitter_sigma_m = 0.001;
    RngStream rng(8, {0x20});
    const auto frames =
        simulate_tracking(m, profile, study_plane(SurfaceOrientation::Horizontal), m.end_time(), rng);

    REQUIRE(frames.front().tracked);
    int untracked = 0;
    for (std::size_t i = 1; i < frames.size(); ++i) {
        if (frames[i].tracked) continue;
        ++untracked;
        for (int j = 0; j < kHandJointCount; ++j)
            CHECK(vec_eq(frames[i].joints[static_cast<std::size_t>(j)],
                         frames[i - 1].joints[static_cast<std::size_t>(j)]));
    }
    CHECK(untracked > 5);
    CHECK(untracked < static_cast<int>(frames.size()) - 1);
}

TEST_CASE("same seed reproduces a session bit for bit") {
    RngStream script_rng_a(2, {0x60});
    RngStream script_rng_b(2, {0x60});
    const Vec2 tablet = SessionHeader{}.tablet_size_mm;
    const MotionScript sa = make_gesture_script(1, 1, tablet, script_rng_a);
    const MotionScript sb = make_gesture_script(1, 1, tablet, script_rng_b);
    const ParticipantProfile profile = ParticipantProfile::nominal(21);
    const SurfacePlane plane = study_plane(SurfaceOrientation::Horizontal);

    const SessionRecording a = generate_session(sa, profile, plane, 21, "p03");
    const SessionRecording b = generate_session(sb, profile, plane, 21, "p03");
    require_identical(a, b);

    const SessionRecording c = generate_session(sa, profile, plane, 22, "p03");
    bool any_diff = false;
    for (std::size_t i = 0; i < std::min(a.hand_stream.size(), c.hand_stream.size()); ++i)
        if (!vec_eq(a.hand_stream[i].joints[kIndexTip], c.hand_stream[i].joints[kIndexTip]))
            any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("scripted sessions carry the expected truth intervals") {
    RngStream rng(14, {0x60});
    const int reps = 2, negatives = 3;
    const MotionScript script =
        make_gesture_script(reps, negatives, SessionHeader{}.tablet_size_mm, rng);
    REQUIRE(script.segments.size() == static_cast<std::size_t>(8 * reps + negatives));

    const SessionRecording rec = generate_session(
        script, ParticipantProfile::nominal(14), study_plane(SurfaceOrientation::Vertical), 14,
        "p05", SurfaceOrientation::Vertical);

    std::map<GestureClass, int> counts;
    int expected_contacts = 0;
    for (const GestureInterval& g : gesture_intervals(rec)) {
        ++counts[g.gesture];
        expected_contacts += g.gesture == GestureClass::DoubleTap ? 2 : 1;
    }
    for (int c = 0; c < kGestureClassCount - 1; ++c)
        CHECK(counts[static_cast<GestureClass>(c)] == reps);
    CHECK(counts.count(GestureClass::Negative) == 0);
    CHECK(contact_intervals(rec).size() == static_cast<std::size_t>(expected_contacts));

    // every contact-down event carries an in-bounds tablet position
    for (const GroundTruthEvent& e : rec.truth_stream)
        if (e.kind == TruthKind::ContactDown) REQUIRE(e.pos_mm.has_value());
}

TEST_CASE("script overlap is rejected") {
    MotionScript script;
    script.segments = {gesture_seg(GestureClass::SingleTap, 0.10, 0.08, 600 * kMs, 150 * kMs),
                       gesture_seg(GestureClass::SingleTap, 0.12, 0.08, 700 * kMs, 150 * kMs)};
    const std::string msg = thrown_message([&] {
        generate_session(script, ParticipantProfile::clean(1),
                         study_plane(SurfaceOrientation::Horizontal), 1);
    });
    CHECK(msg.find("script overlap") != std::string::npos);

    MotionScript bad_order;
    bad_order.segments = {gesture_seg(GestureClass::SingleTap, 0.10, 0.08, 900 * kMs, 150 * kMs),
                          gesture_seg(GestureClass::SingleTap, 0.12, 0.08, 900 * kMs, 150 * kMs)};
    CHECK_THROWS_AS(bad_order.validate(), std::invalid_argument);
}

TEST_CASE("plane perturbation applies the registration error exactly") {
    const SurfacePlane plane = study_plane(SurfaceOrientation::Horizontal);
    ParticipantProfile profile = ParticipantProfile::clean(6);
    profile.plane_tilt_deg = 2.0;
    profile.plane_offset_m = 0.004;

    RngStream rng(6, {0x40});
    const SurfacePlane reg = perturb_plane(plane, profile, rng);
    CHECK(is_orthonormal(reg.basis));
    const double cosang = reg.normal().dot(plane.normal());
    CHECK(std::acos(std::clamp(cosang, -1.0, 1.0)) ==
          doctest::Approx(2.0 * M_PI / 180.0).epsilon(1e-9));
    CHECK((reg.origin - plane.origin).dot(plane.normal()) == doctest::Approx(0.004));
    CHECK((reg.origin - plane.origin).norm() == doctest::Approx(0.004));

    // a clean profile leaves the plane untouched
    RngStream rng2(6, {0x40});
    const SurfacePlane same = perturb_plane(plane, ParticipantProfile::clean(6), rng2);
    CHECK(vec_eq(same.origin, plane.origin));
    CHECK((same.basis - plane.basis).norm() < 1e-15);
}

TEST_CASE("crosshair tasks tap exactly at their stored targets") {
    const SurfacePlane plane = study_plane(SurfaceOrientation::Horizontal);
    const SpatialTask task = generate_spatial_task(SpatialTask::Kind::Crosshair, 25,
                                                   ParticipantProfile::clean(33), plane, 33);
    REQUIRE(task.targets_mm.size() == 25);
    REQUIRE(task.shapes.empty());

    std::vector<std::optional<Vec2>> downs;
    for (const GroundTruthEvent& e : task.session.truth_stream)
        if (e.kind == TruthKind::ContactDown) downs.push_back(*e.pos_mm);
    REQUIRE(downs.size() == 25);
    for (std::size_t i = 0; i < downs.size(); ++i) {
        CHECK(std::abs(downs[i]->x() - task.targets_mm[i].x()) < 1e-9);
        CHECK(std::abs(downs[i]->y() - task.targets_mm[i].y()) < 1e-9);
    }
    const CrosshairReport report = crosshair_error(downs, task.targets_mm);
    CHECK(report.mean_mm < 1e-9);
    CHECK(report.misses == 0);
}

TEST_CASE("crosshair targets are uniform over the inset tablet") {
    const Vec2 tablet = SessionHeader{}.tablet_size_mm;
    const SpatialTask task = generate_spatial_task(
        SpatialTask::Kind::Crosshair, 300, ParticipantProfile::clean(51),
        study_plane(SurfaceOrientation::Horizontal), 51);

    const int nx = 4, ny = 3;
    int bins[nx * ny] = {};
    for (const Vec2& t : task.targets_mm) {
        REQUIRE(t.x() >= 15.0);
        REQUIRE(t.x() <= tablet.x() - 15.0);
        REQUIRE(t.y() >= 15.0);
        REQUIRE(t.y() <= tablet.y() - 15.0);
        const int bx = std::min(nx - 1, static_cast<int>((t.x() - 15.0) / (tablet.x() - 30.0) * nx));
        const int by = std::min(ny - 1, static_cast<int>((t.y() - 15.0) / (tablet.y() - 30.0) * ny));
        ++bins[by * nx + bx];
    }
    const double expect = 300.0 / (nx * ny);
    double chi2 = 0.0;
    for (int b = 0; b < nx * ny; ++b)
        chi2 += (bins[b] - expect) * (bins[b] - expect) / expect;
    CHECK(chi2 < 19.675); // chi-square critical value, dof 11, alpha 0.05
}

TEST_CASE("path tasks stay within their documented shape ranges") {
    const SurfacePlane plane = study_plane(SurfaceOrientation::Horizontal);
    const Vec2 tablet = SessionHeader{}.tablet_size_mm;

    SUBCASE("lines") {
        const SpatialTask task = generate_spatial_task(SpatialTask::Kind::PathLine, 20,
                                                       ParticipantProfile::clean(61), plane, 61);
        REQUIRE(task.shapes.size() == 20);
        for (const PathShape& s : task.shapes) {
            REQUIRE(s.kind == PathShape::Kind::Segment);
            const double len = (s.b - s.a).norm();
            CHECK(len >= 50.0);
            CHECK(len <= 150.0);
            for (const Vec2& p : {s.a, s.b}) {
                CHECK(p.x() >= 10.0);
                CHECK(p.x() <= tablet.x() - 10.0);
                CHECK(p.y() >= 10.0);
                CHECK(p.y() <= tablet.y() - 10.0);
            }
        }
    }
    SUBCASE("circles") {
        const SpatialTask task = generate_spatial_task(SpatialTask::Kind::PathCircle, 20,
                                                       ParticipantProfile::clean(62), plane, 62);
        REQUIRE(task.shapes.size() == 20);
        for (const PathShape& s : task.shapes) {
            REQUIRE(s.kind == PathShape::Kind::Circle);
            CHECK(s.radius_mm >= 25.0);
            CHECK(s.radius_mm <= 50.0);
            CHECK(s.center.x() >= s.radius_mm + 10.0);
            CHECK(s.center.x() <= tablet.x() - s.radius_mm - 10.0);
            CHECK(s.center.y() >= s.radius_mm + 10.0);
            CHECK(s.center.y() <= tablet.y() - s.radius_mm - 10.0);
        }
    }
}

TEST_CASE("zero-noise traces follow their shapes to within the wobble") {
    const SurfacePlane plane = study_plane(SurfaceOrientation::Horizontal);
    const SpatialTask task = generate_spatial_task(SpatialTask::Kind::PathCircle, 4,
                                                   ParticipantProfile::clean(71), plane, 71);
    const auto contacts = contact_intervals(task.session);
    REQUIRE(contacts.size() == 4);
    const SurfacePlane& reg = task.session.header.plane; // clean: equals the true plane

    for (std::size_t i = 0; i < contacts.size(); ++i) {
        std::vector<Vec2> points;
        for (const HandFrame& f : task.session.hand_stream) {
            if (f.t < contacts[i].first || f.t > contacts[i].second) continue;
            const Vec3 local = reg.to_local(f.index_tip());
            points.emplace_back(local.x() * 1000.0, local.y() * 1000.0);
            CHECK(std::abs(local.z()) < 1e-9); // on the surface while tracing
        }
        REQUIRE(points.size() > 30);
        const double err = path_trace_error(points, task.shapes[i]);
        CHECK(err < 2.0);  // bounded by the 1.2 mm tracing wobble
        CHECK(err > 0.01); // and the wobble is actually there
    }
}

TEST_CASE("participant profiles enforce the noise caps") {
    CHECK_NOTHROW(ParticipantProfile::clean(1).validate());
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const ParticipantProfile p = ParticipantProfile::nominal(seed);
        CHECK_NOTHROW(p.validate());
        const ParticipantProfile q = ParticipantProfile::nominal(seed);
        CHECK(p.hand_scale == q.hand_scale);
        CHECK(vec_eq(p.tracking_bias_m, q.tracking_bias_m));
    }
    CHECK(ParticipantProfile::nominal(1).hand_scale != ParticipantProfile::nominal(2).hand_scale);

    ParticipantProfile p = ParticipantProfile::clean(1);
    p.tracking_bias_m = Vec3(0.016, 0, 0);
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = ParticipantProfile::clean(1);
    p.jitter_sigma_m = 0.006;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = ParticipantProfile::clean(1);
    p.dropout_rate = 0.25;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = ParticipantProfile::clean(1);
    p.plane_tilt_deg = 3.5;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = ParticipantProfile::clean(1);
    p.plane_offset_m = 0.011;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = ParticipantProfile::clean(1);
    p.hand_scale = 0.5;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = ParticipantProfile::clean(1);
    p.accel_noise = -0.1;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("scenario files parse and realize") {
    const std::string text = R"(# demo scenario
participant p07
seed 42
orientation vertical
jitter_mm 1.0
bias_mm 1 -2 3
dropout 0.02
tilt_deg 0.5
offset_mm 2
accel_noise 0.03
gyro_noise 0.004
impulse_gain 5
hand_scale 1.05
segment single_tap 100 80 500 120
segment swipe_right 120 90 2500 250
segment mimic 100 80 4500 600
segment line 60 40 160 120 6500 1200
segment circle 127 83 30 9000 2400
segment hover 100 80 12500 500
)";
    const Scenario sc = parse_scenario(text);
    CHECK(sc.participant == "p07");
    CHECK(sc.seed == 42);
    CHECK(sc.orientation == SurfaceOrientation::Vertical);
    CHECK(sc.profile.jitter_sigma_m == doctest::Approx(0.001));
    CHECK(vec_eq(sc.profile.tracking_bias_m, Vec3(0.001, -0.002, 0.003)));
    CHECK(sc.profile.dropout_rate == doctest::Approx(0.02));
    CHECK(sc.profile.plane_tilt_deg == doctest::Approx(0.5));
    CHECK(sc.profile.plane_offset_m == doctest::Approx(0.002));
    CHECK(sc.profile.hand_scale == doctest::Approx(1.05));
    REQUIRE(sc.segments.size() == 6);
    CHECK(sc.segments[0].kind == ScriptSegment::Kind::Gesture);
    CHECK(sc.segments[0].gesture == GestureClass::SingleTap);
    CHECK(sc.segments[0].start == 500 * kMs);
    CHECK(sc.segments[0].duration == 120 * kMs);
    CHECK(sc.segments[2].kind == ScriptSegment::Kind::NegativeMimic);
    CHECK(sc.segments[3].kind == ScriptSegment::Kind::Trace);
    CHECK(sc.segments[3].shape.kind == PathShape::Kind::Segment);
    CHECK(sc.segments[4].shape.kind == PathShape::Kind::Circle);
    CHECK(sc.segments[4].shape.radius_mm == doctest::Approx(30.0));
    CHECK(sc.segments[5].kind == ScriptSegment::Kind::Hover);

    const SessionRecording rec = realize_scenario(sc);
    CHECK(gesture_intervals(rec).size() == 2);
    CHECK(contact_intervals(rec).size() == 4); // tap, swipe, line, circle
    CHECK(rec.header.participant == "p07");
    CHECK(rec.header.orientation == SurfaceOrientation::Vertical);
}

TEST_CASE("scenario auto-script uses reps and negatives") {
    const Scenario sc = parse_scenario("seed 77\nreps 1\nnegatives 2\npreset nominal\n");
    const SessionRecording rec = realize_scenario(sc);
    CHECK(gesture_intervals(rec).size() == 8);
}

TEST_CASE("scenario errors carry line numbers") {
    CHECK(thrown_message([] { parse_scenario("orientation diagonal\n"); }).find("line 1") !=
          std::string::npos);
    CHECK(thrown_message([] { parse_scenario("seed 1\n\nbogus 3\n"); }).find("line 3") !=
          std::string::npos);
    CHECK(thrown_message([] { parse_scenario("segment warble 1 2 3 4\n"); })
              .find("unknown segment type") != std::string::npos);
    CHECK(thrown_message([] { parse_scenario("segment negative 1 2 3 4\n"); }).find("mimic") !=
          std::string::npos);
    CHECK(thrown_message([] { parse_scenario("jitter_mm\n"); }).find("missing value") !=
          std::string::npos);
    CHECK(thrown_message([] { parse_scenario("preset vintage\n"); }).find("line 1") !=
          std::string::npos);
}
