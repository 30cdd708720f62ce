#include "sxr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace sxr {

namespace {

constexpr TimeNs kMs = 1'000'000;
constexpr double kHoverHeight = 0.05;       // rest height above the surface
constexpr double kDoubleTapLift = 0.014;    // between-tap apex
constexpr double kTraceSpeed = 0.08;        // m/s along spatial shapes
constexpr double kTraceWobble = 0.0012;     // human tracing wobble amplitude
constexpr double kJitterAlpha = 0.6;        // tracking jitter low-pass pole
constexpr double kGravity = 9.81;
constexpr double kGyroCoupling = 1.5;       // wrist angular-rate proxy gain

// Session sub-stream ids.
constexpr std::uint64_t kMotionStream = 0x10;
constexpr std::uint64_t kTrackStream = 0x20;
constexpr std::uint64_t kImuStream = 0x30;
constexpr std::uint64_t kPlaneStream = 0x40;
constexpr std::uint64_t kTargetStream = 0x50;
constexpr std::uint64_t kScriptStream = 0x60;

const Vec3 kThumbRest(-0.035, -0.045, 0.012);
const Vec3 kThumbContact(-0.030, -0.040, 0.015);
const Vec3 kWristOffset(-0.012, -0.110, 0.045);

TimeNs ms_to_ns(double ms) { return static_cast<TimeNs>(ms * 1e6); }

double smoothstep(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * (3.0 - 2.0 * u);
}

Vec3 gauss3(RngStream& rng) {
    const double x = rng.next_gauss();
    const double y = rng.next_gauss();
    const double z = rng.next_gauss();
    return Vec3(x, y, z);
}

TruePose touch_pose(const Vec2& at) {
    TruePose p;
    p.index = Vec3(at.x(), at.y(), 0.0);
    p.thumb = p.index + kThumbContact;
    p.wrist = p.index + kWristOffset;
    return p;
}

Vec2 swipe_direction(GestureClass kind) {
    switch (kind) {
        case GestureClass::SwipeLeft: return Vec2(-1, 0);
        case GestureClass::SwipeRight: return Vec2(1, 0);
        case GestureClass::SwipeUp: return Vec2(0, 1);
        case GestureClass::SwipeDown: return Vec2(0, -1);
        default: throw std::logic_error("not a swipe");
    }
}

// Per-contact dwell bounds by kind, nanoseconds.
std::pair<TimeNs, TimeNs> contact_bounds(GestureClass kind) {
    switch (kind) {
        case GestureClass::SingleTap:
        case GestureClass::DoubleTap: return {80 * kMs, 200 * kMs};
        case GestureClass::SwipeLeft:
        case GestureClass::SwipeRight:
        case GestureClass::SwipeUp:
        case GestureClass::SwipeDown: return {150 * kMs, 400 * kMs};
        case GestureClass::PinchIn:
        case GestureClass::PinchOut: return {300 * kMs, 600 * kMs};
        case GestureClass::Negative: break;
    }
    throw std::invalid_argument("gesture_trajectory: Negative has no trajectory");
}

} // namespace

// ---------------------------------------------------------------------------
// ParticipantProfile
// ---------------------------------------------------------------------------

void ParticipantProfile::validate() const {
    if (hand_scale < 0.7 || hand_scale > 1.3)
        throw std::invalid_argument("profile: hand scale outside [0.7, 1.3]");
    if (tracking_bias_m.norm() > kMaxTrackingBiasM + 1e-12)
        throw std::invalid_argument("profile: tracking bias above 15 mm");
    if (jitter_sigma_m < 0 || jitter_sigma_m > kMaxJitterSigmaM)
        throw std::invalid_argument("profile: jitter sigma outside [0, 5] mm");
    if (dropout_rate < 0 || dropout_rate > 0.2)
        throw std::invalid_argument("profile: dropout rate outside [0, 0.2]");
    if (plane_tilt_deg < 0 || plane_tilt_deg > kMaxPlaneTiltDeg)
        throw std::invalid_argument("profile: plane tilt above 3 degrees");
    if (std::abs(plane_offset_m) > kMaxPlaneOffsetM)
        throw std::invalid_argument("profile: plane offset above 10 mm");
    if (accel_noise < 0 || gyro_noise < 0 || impulse_gain < 0 || impulse_gain > 20)
        throw std::invalid_argument("profile: sensor noise values out of range");
}

ParticipantProfile ParticipantProfile::clean(std::uint64_t seed) {
    ParticipantProfile p;
    p.seed = seed;
    return p;
}

ParticipantProfile ParticipantProfile::nominal(std::uint64_t seed) {
    RngStream rng(seed, {0xA0});
    ParticipantProfile p;
    p.seed = seed;
    p.hand_scale = rng.uniform(0.9, 1.1);
    Vec3 dir = gauss3(rng);
    if (dir.norm() < 1e-9) dir = Vec3(0, 0, 1);
    p.tracking_bias_m = dir.normalized() * rng.uniform(0.001, 0.005);
    p.jitter_sigma_m = rng.uniform(0.0020, 0.0032);
    p.dropout_rate = 0.01;
    p.plane_tilt_deg = rng.uniform(0.3, 1.5);
    p.plane_offset_m = rng.uniform(0.001, 0.004);
    p.accel_noise = 0.05;
    p.gyro_noise = 0.01;
    p.impulse_gain = rng.uniform(3.5, 6.0);
    return p;
}

// ---------------------------------------------------------------------------
// TrueMotion
// ---------------------------------------------------------------------------

TruePose TrueMotion::at(TimeNs t) const {
    if (phases_.empty()) return last_;
    if (t <= 0) return phases_.front().fn(0);
    if (t >= end_) return last_;
    auto it = std::upper_bound(phases_.begin(), phases_.end(), t,
                               [](TimeNs v, const Phase& p) { return v < p.t0; });
    --it;
    return it->fn(std::min(t - it->t0, it->t1 - it->t0));
}

void TrueMotion::set_start(const TruePose& pose) {
    if (!phases_.empty()) throw std::logic_error("set_start after phases were added");
    last_ = pose;
}

void TrueMotion::custom(TimeNs dur, PoseFn fn) {
    if (dur <= 0) throw std::invalid_argument("motion phase needs a positive duration");
    last_ = fn(dur);
    phases_.push_back({end_, end_ + dur, std::move(fn)});
    end_ += dur;
}

void TrueMotion::hold(TimeNs dur) {
    if (dur == 0) return;
    const TruePose p = last_;
    custom(dur, [p](TimeNs) { return p; });
}

void TrueMotion::move_to(TimeNs dur, const TruePose& target) {
    const TruePose a = last_;
    const TruePose b = target;
    const double dd = static_cast<double>(dur);
    custom(dur, [a, b, dd](TimeNs lt) {
        const double s = smoothstep(static_cast<double>(lt) / dd);
        TruePose p;
        p.index = a.index + (b.index - a.index) * s;
        p.thumb = a.thumb + (b.thumb - a.thumb) * s;
        p.wrist = a.wrist + (b.wrist - a.wrist) * s;
        return p;
    });
}

void TrueMotion::mark_contact(TimeNs start, TimeNs end) {
    if (start >= end) throw std::invalid_argument("contact interval is empty");
    if (!contacts_.empty() && start < contacts_.back().second)
        throw std::invalid_argument("contact intervals overlap");
    contacts_.emplace_back(start, end);
}

void TrueMotion::mark_gesture(TimeNs start, TimeNs end, GestureClass g) {
    if (start >= end) throw std::invalid_argument("gesture interval is empty");
    if (!gestures_.empty() && start < gestures_.back().end)
        throw std::invalid_argument("gesture intervals overlap");
    gestures_.push_back({start, end, g});
}

// ---------------------------------------------------------------------------
// Poses and gestures
// ---------------------------------------------------------------------------

TruePose rest_pose(const Vec2& location_m) {
    TruePose p;
    p.index = Vec3(location_m.x(), location_m.y(), kHoverHeight);
    p.thumb = p.index + kThumbRest;
    p.wrist = p.index + kWristOffset;
    return p;
}

std::array<Vec3, kHandJointCount> synth_joints(const TruePose& pose, double hand_scale) {
    const double s = hand_scale;
    std::array<Vec3, kHandJointCount> j;
    j[kIndexTip] = pose.index;
    j[kIndexDip] = pose.index + s * Vec3(-0.004, -0.022, 0.010);
    j[kIndexPip] = pose.index + s * Vec3(-0.007, -0.046, 0.022);
    j[kIndexMcp] = pose.index + s * Vec3(-0.010, -0.075, 0.030);
    j[kThumbTip] = pose.thumb;
    j[kThumbDip] = pose.thumb + s * Vec3(0.010, -0.020, 0.006);
    j[kThumbPip] = pose.thumb + s * Vec3(0.022, -0.038, 0.012);
    j[kThumbMcp] = pose.thumb + s * Vec3(0.034, -0.058, 0.020);
    j[kWrist] = pose.index + s * (pose.wrist - pose.index);
    return j;
}

void append_gesture(TrueMotion& m, GestureClass kind, const Vec2& loc, TimeNs d, RngStream& rng) {
    const auto [lo, hi] = contact_bounds(kind);
    if (d < lo || d > hi)
        throw std::invalid_argument("gesture_trajectory: contact duration outside the " +
                                    std::string(gesture_name(kind)) + " bounds");

    const TimeNs align_t = ms_to_ns(rng.uniform(150, 250));
    const TimeNs approach_t = ms_to_ns(rng.uniform(120, 180));
    const TimeNs retract_t = ms_to_ns(rng.uniform(120, 180));

    switch (kind) {
        case GestureClass::SingleTap: {
            m.move_to(align_t, rest_pose(loc));
            m.move_to(approach_t, touch_pose(loc));
            const TimeNs on = m.end_time();
            m.hold(d);
            const TimeNs off = m.end_time();
            m.move_to(retract_t, rest_pose(loc));
            m.mark_contact(on, off);
            m.mark_gesture(on, off, kind);
            return;
        }
        case GestureClass::DoubleTap: {
            const TimeNs gap = ms_to_ns(rng.uniform(100, 250));
            m.move_to(align_t, rest_pose(loc));
            m.move_to(approach_t, touch_pose(loc));
            const TimeNs on1 = m.end_time();
            m.hold(d);
            const TimeNs off1 = m.end_time();
            TruePose lift = touch_pose(loc);
            lift.index.z() = kDoubleTapLift;
            lift.thumb.z() += kDoubleTapLift;
            m.move_to(gap / 2, lift);
            m.move_to(gap - gap / 2, touch_pose(loc));
            const TimeNs on2 = m.end_time();
            m.hold(d);
            const TimeNs off2 = m.end_time();
            m.move_to(retract_t, rest_pose(loc));
            m.mark_contact(on1, off1);
            m.mark_contact(on2, off2);
            m.mark_gesture(on1, off2, kind);
            return;
        }
        case GestureClass::SwipeLeft:
        case GestureClass::SwipeRight:
        case GestureClass::SwipeUp:
        case GestureClass::SwipeDown: {
            const Vec2 dir = swipe_direction(kind);
            const double len = rng.uniform(0.045, 0.070);
            const Vec2 from = loc - 0.5 * len * dir;
            const Vec2 to = loc + 0.5 * len * dir;
            m.move_to(align_t, rest_pose(from));
            m.move_to(approach_t, touch_pose(from));
            const TimeNs on = m.end_time();
            m.move_to(d, touch_pose(to)); // on-surface sweep
            const TimeNs off = m.end_time();
            m.move_to(retract_t, rest_pose(to));
            m.mark_contact(on, off);
            m.mark_gesture(on, off, kind);
            return;
        }
        case GestureClass::PinchIn:
        case GestureClass::PinchOut: {
            const double delta = rng.uniform(0.032, 0.045);
            const double s0 = kind == GestureClass::PinchIn ? 0.075 : 0.034;
            const double s1 = kind == GestureClass::PinchIn ? s0 - delta : s0 + delta;
            auto spread = [&](double sep, double z) {
                TruePose p;
                p.index = Vec3(loc.x() + sep / 2, loc.y(), z);
                p.thumb = Vec3(loc.x() - sep / 2, loc.y(), z);
                p.wrist = Vec3(loc.x(), loc.y(), z) + kWristOffset;
                return p;
            };
            m.move_to(align_t, spread(s0, 0.025));
            m.move_to(approach_t, spread(s0, 0.0));
            const TimeNs on = m.end_time();
            const double dd = static_cast<double>(d);
            const Vec2 l = loc;
            m.custom(d, [l, s0, s1, dd](TimeNs lt) {
                const double sep = s0 + (s1 - s0) * smoothstep(static_cast<double>(lt) / dd);
                TruePose p;
                p.index = Vec3(l.x() + sep / 2, l.y(), 0.0);
                p.thumb = Vec3(l.x() - sep / 2, l.y(), 0.0);
                p.wrist = Vec3(l.x(), l.y(), 0.0) + kWristOffset;
                return p;
            });
            const TimeNs off = m.end_time();
            m.move_to(retract_t, rest_pose(loc));
            m.mark_contact(on, off);
            m.mark_gesture(on, off, kind);
            return;
        }
        case GestureClass::Negative: break;
    }
    throw std::invalid_argument("gesture_trajectory: Negative has no trajectory");
}

TrueMotion gesture_trajectory(GestureClass kind, const Vec2& location_m, TimeNs contact_duration,
                              RngStream& rng) {
    TrueMotion m;
    m.set_start(rest_pose(location_m));
    append_gesture(m, kind, location_m, contact_duration, rng);
    return m;
}

namespace {

void append_mimic(TrueMotion& m, const Vec2& loc, TimeNs dur, RngStream& rng) {
    if (dur <= 0) throw std::invalid_argument("mimic segment needs a positive duration");
    const std::uint64_t variant = rng.uniform_int(3);
    const TimeNs align_t = ms_to_ns(rng.uniform(150, 250));
    if (variant == 0) { // mid-air swipe
        const Vec2 dir = swipe_direction(static_cast<GestureClass>(
            static_cast<int>(GestureClass::SwipeLeft) + static_cast<int>(rng.uniform_int(4))));
        const double len = rng.uniform(0.045, 0.070);
        TruePose a = rest_pose(loc - 0.5 * len * dir);
        TruePose b = rest_pose(loc + 0.5 * len * dir);
        a.index.z() = b.index.z() = 0.030;
        m.move_to(align_t, a);
        m.move_to(dur, b);
    } else if (variant == 1) { // mid-air circle
        const double r = 0.025;
        const Vec2 l = loc;
        TruePose start = rest_pose(loc + Vec2(r, 0));
        start.index.z() = 0.035;
        m.move_to(align_t, start);
        const double dd = static_cast<double>(dur);
        m.custom(dur, [l, r, dd](TimeNs lt) {
            const double th = 2.0 * M_PI * smoothstep(static_cast<double>(lt) / dd);
            TruePose p;
            p.index = Vec3(l.x() + r * std::cos(th), l.y() + r * std::sin(th), 0.035);
            p.thumb = p.index + kThumbRest;
            p.wrist = p.index + kWristOffset;
            return p;
        });
    } else { // aborted tap: descend towards the surface but stop short
        m.move_to(align_t, rest_pose(loc));
        TruePose low = rest_pose(loc);
        low.index.z() = 0.018;
        low.thumb = low.index + kThumbRest;
        m.move_to(dur / 2, low);
        m.move_to(dur - dur / 2, rest_pose(loc));
    }
}

void append_trace(TrueMotion& m, const PathShape& shape_mm, TimeNs dur, RngStream& rng) {
    if (dur <= 0) throw std::invalid_argument("trace segment needs a positive duration");
    const TimeNs align_t = ms_to_ns(rng.uniform(150, 250));
    const TimeNs approach_t = ms_to_ns(rng.uniform(120, 180));
    const TimeNs retract_t = ms_to_ns(rng.uniform(120, 180));
    const double dd = static_cast<double>(dur);
    const double wobble_cycles = 3.0;

    if (shape_mm.kind == PathShape::Kind::Segment) {
        const Vec2 a = shape_mm.a / 1000.0;
        const Vec2 b = shape_mm.b / 1000.0;
        Vec2 n(-(b - a).y(), (b - a).x());
        if (n.norm() > 1e-12) n.normalize();
        m.move_to(align_t, rest_pose(a));
        m.move_to(approach_t, touch_pose(a));
        const TimeNs on = m.end_time();
        m.custom(dur, [a, b, n, dd, wobble_cycles](TimeNs lt) {
            const double u = std::clamp(static_cast<double>(lt) / dd, 0.0, 1.0);
            const double env = std::sin(M_PI * u);
            const double w = kTraceWobble * std::sin(2.0 * M_PI * wobble_cycles * u) * env * env;
            const Vec2 xy = a + (b - a) * smoothstep(u) + w * n;
            return touch_pose(xy);
        });
        const TimeNs off = m.end_time();
        m.move_to(retract_t, rest_pose(b));
        m.mark_contact(on, off);
    } else {
        const Vec2 c = shape_mm.center / 1000.0;
        const double r = shape_mm.radius_mm / 1000.0;
        m.move_to(align_t, rest_pose(c + Vec2(r, 0)));
        m.move_to(approach_t, touch_pose(c + Vec2(r, 0)));
        const TimeNs on = m.end_time();
        m.custom(dur, [c, r, dd, wobble_cycles](TimeNs lt) {
            const double u = std::clamp(static_cast<double>(lt) / dd, 0.0, 1.0);
            const double th = 2.0 * M_PI * smoothstep(u);
            const double env = std::sin(M_PI * u);
            const double rr =
                r + kTraceWobble * std::sin(2.0 * M_PI * wobble_cycles * u) * env * env;
            return touch_pose(Vec2(c.x() + rr * std::cos(th), c.y() + rr * std::sin(th)));
        });
        const TimeNs off = m.end_time();
        m.move_to(retract_t, rest_pose(c + Vec2(r, 0)));
        m.mark_contact(on, off);
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Scripts
// ---------------------------------------------------------------------------

void MotionScript::validate() const {
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const ScriptSegment& s = segments[i];
        if (s.start < 0 || s.duration <= 0)
            throw std::invalid_argument("script segment " + std::to_string(i) +
                                        ": negative start or non-positive duration");
        if (i > 0 && s.start <= segments[i - 1].start)
            throw std::invalid_argument("script segment " + std::to_string(i) +
                                        ": start times must strictly increase");
    }
}

MotionScript make_gesture_script(int reps_per_class, int negatives, const Vec2& tablet_mm,
                                 RngStream& rng) {
    if (reps_per_class < 0 || negatives < 0)
        throw std::invalid_argument("script: negative rep counts");
    struct Entry {
        bool mimic = false;
        GestureClass g = GestureClass::Negative;
    };
    std::vector<Entry> entries;
    for (int c = 0; c < kGestureClassCount - 1; ++c)
        for (int r = 0; r < reps_per_class; ++r)
            entries.push_back({false, static_cast<GestureClass>(c)});
    for (int n = 0; n < negatives; ++n) entries.push_back({true, GestureClass::Negative});
    for (std::size_t i = entries.size(); i > 1; --i)
        std::swap(entries[i - 1], entries[static_cast<std::size_t>(rng.uniform_int(i))]);

    const double xlo = 0.065, xhi = tablet_mm.x() / 1000.0 - 0.065;
    const double ylo = 0.048, yhi = tablet_mm.y() / 1000.0 - 0.048;

    MotionScript script;
    TimeNs cursor = 600 * kMs;
    for (const Entry& e : entries) {
        ScriptSegment seg;
        seg.location_m = Vec2(rng.uniform(xlo, xhi), rng.uniform(ylo, yhi));
        seg.start = cursor;
        TimeNs interior;
        if (e.mimic) {
            seg.kind = ScriptSegment::Kind::NegativeMimic;
            seg.duration = ms_to_ns(rng.uniform(500, 900));
            interior = seg.duration;
        } else {
            seg.kind = ScriptSegment::Kind::Gesture;
            seg.gesture = e.g;
            const auto [lo, hi] = contact_bounds(e.g);
            seg.duration = lo + static_cast<TimeNs>(rng.uniform_int(
                                    static_cast<std::uint64_t>(hi - lo)));
            interior = seg.duration;
            if (e.g == GestureClass::DoubleTap) interior = 2 * seg.duration + 250 * kMs;
        }
        // conservative bound: align 250 + approach 180 + interior + retract 180
        cursor += 710 * kMs + interior + ms_to_ns(rng.uniform(250, 450));
        script.segments.push_back(seg);
    }
    return script;
}

// ---------------------------------------------------------------------------
// Sensors
// ---------------------------------------------------------------------------

std::vector<HandFrame> simulate_tracking(const TrueMotion& motion,
                                         const ParticipantProfile& profile,
                                         const SurfacePlane& true_plane, TimeNs t_end,
                                         RngStream& rng) {
    profile.validate();
    const double sigma_in =
        profile.jitter_sigma_m * std::sqrt((1.0 + kJitterAlpha) / (1.0 - kJitterAlpha));
    const Vec3 bias_world = true_plane.basis * profile.tracking_bias_m;
    const Vec3 gaze_target = true_plane.to_world(Vec3(0.127, 0.083, 0.0));

    std::array<Vec3, kHandJointCount> jitter;
    jitter.fill(Vec3::Zero());

    std::vector<HandFrame> frames;
    for (std::int64_t i = 0;; ++i) {
        const TimeNs t = i * kSecondNs / 60;
        if (t > t_end) break;
        const TruePose pose = motion.at(t);
        const auto joints = synth_joints(pose, profile.hand_scale);

        HandFrame f;
        f.t = t;
        f.joints.resize(kHandJointCount);
        for (int j = 0; j < kHandJointCount; ++j) {
            Vec3& st = jitter[static_cast<std::size_t>(j)];
            st = kJitterAlpha * st + (1.0 - kJitterAlpha) * (sigma_in * gauss3(rng));
            f.joints[static_cast<std::size_t>(j)] =
                true_plane.to_world(joints[static_cast<std::size_t>(j)]) + bias_world + st;
        }

        const double ts = 1e-9 * static_cast<double>(t);
        const Vec3 drift(0.004 * std::sin(2.0 * M_PI * 0.18 * ts),
                         0.004 * std::sin(2.0 * M_PI * 0.13 * ts + 1.0),
                         0.002 * std::sin(2.0 * M_PI * 0.11 * ts + 2.0));
        f.head_position = true_plane.to_world(Vec3(0.127, 0.083 - 0.32, 0.46) + drift);
        Vec3 gaze = gaze_target - f.head_position;
        f.head_orientation = Quat::FromTwoVectors(Vec3::UnitZ(), gaze).normalized();

        const bool dropped = i > 0 && rng.next_bool(profile.dropout_rate);
        if (dropped) {
            f.joints = frames.back().joints; // tracker freeze
            f.tracked = false;
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

std::vector<ImuSample> simulate_imu(const TrueMotion& motion, const ParticipantProfile& profile,
                                    const SurfacePlane& true_plane, TimeNs t_end,
                                    RngStream& rng) {
    profile.validate();
    struct Burst {
        TimeNs t0 = 0;
        double freq_hz = 0, tau_s = 0;
    };
    std::vector<Burst> bursts;
    for (const auto& [on, off] : motion.contacts()) {
        (void)off;
        bursts.push_back({on, rng.uniform(40.0, 90.0), rng.uniform(0.020, 0.050)});
    }

    const auto n = static_cast<std::size_t>(t_end / kMasterPeriodNs) + 1;
    const double dt = 1e-9 * static_cast<double>(kMasterPeriodNs);
    std::vector<Vec3> wrist(n);
    for (std::size_t k = 0; k < n; ++k)
        wrist[k] = true_plane.to_world(motion.at(static_cast<TimeNs>(k) * kMasterPeriodNs).wrist);

    auto accel_at = [&](std::size_t k) {
        const std::size_t c = std::clamp<std::size_t>(k, 1, n - 2);
        return (wrist[c + 1] - 2.0 * wrist[c] + wrist[c - 1]) / (dt * dt);
    };
    auto velocity_at = [&](std::size_t k) {
        const std::size_t c = std::clamp<std::size_t>(k, 1, n - 2);
        return (wrist[c + 1] - wrist[c - 1]) / (2.0 * dt);
    };

    const Vec3 burst_dir(0.35, 0.35, 1.0);
    std::vector<ImuSample> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        const TimeNs t = static_cast<TimeNs>(k) * kMasterPeriodNs;
        const Vec3 specific = accel_at(k) + Vec3(0, 0, kGravity);
        Vec3 a = true_plane.basis.transpose() * specific;
        for (const Burst& b : bursts) {
            const double dtc = 1e-9 * static_cast<double>(t - b.t0);
            if (dtc < 0 || dtc > 6.0 * b.tau_s) continue;
            a += profile.impulse_gain * std::exp(-dtc / b.tau_s) *
                 std::sin(2.0 * M_PI * b.freq_hz * dtc) * burst_dir;
        }
        a += profile.accel_noise * gauss3(rng);
        const Vec3 v_local = true_plane.basis.transpose() * velocity_at(k);
        const Vec3 g = kGyroCoupling * v_local.cross(Vec3::UnitZ()) + profile.gyro_noise * gauss3(rng);
        out[k] = {t, a, g};
    }
    return out;
}

SurfacePlane perturb_plane(const SurfacePlane& true_plane, const ParticipantProfile& profile,
                           RngStream& rng) {
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    const Vec3 axis = true_plane.basis * Vec3(std::cos(phi), std::sin(phi), 0.0);
    const double tilt = profile.plane_tilt_deg * M_PI / 180.0;
    SurfacePlane reg;
    reg.basis = Eigen::AngleAxisd(tilt, axis).toRotationMatrix() * true_plane.basis;
    reg.origin = true_plane.origin + profile.plane_offset_m * true_plane.normal();
    return reg;
}

SurfacePlane study_plane(SurfaceOrientation orientation) {
    SurfacePlane p;
    if (orientation == SurfaceOrientation::Horizontal) {
        p.origin = Vec3(0.0, 0.0, 0.72);
        p.basis = Mat3::Identity();
    } else {
        p.origin = Vec3(0.0, 0.45, 0.90);
        p.basis.col(0) = Vec3(1, 0, 0);
        p.basis.col(1) = Vec3(0, 0, 1);
        p.basis.col(2) = Vec3(0, -1, 0);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Session generation
// ---------------------------------------------------------------------------

SessionRecording generate_session(const MotionScript& script, const ParticipantProfile& profile,
                                  const SurfacePlane& true_plane, std::uint64_t seed,
                                  const std::string& participant,
                                  SurfaceOrientation orientation) {
    profile.validate();
    script.validate();
    RngStream motion_rng(seed, {kMotionStream});

    TrueMotion m;
    const Vec2 first_loc =
        script.segments.empty() ? Vec2(0.127, 0.083) : script.segments.front().location_m;
    m.set_start(rest_pose(first_loc));

    for (std::size_t i = 0; i < script.segments.size(); ++i) {
        const ScriptSegment& seg = script.segments[i];
        if (seg.start < m.end_time())
            throw std::invalid_argument("script overlap at segment " + std::to_string(i));
        const TimeNs gap = seg.start - m.end_time();
        if (gap > 0) {
            const TimeNs transit = std::min<TimeNs>(gap, 400 * kMs);
            if (gap - transit > 0) m.hold(gap - transit);
            m.move_to(transit, rest_pose(seg.location_m));
        }
        switch (seg.kind) {
            case ScriptSegment::Kind::Gesture:
                append_gesture(m, seg.gesture, seg.location_m, seg.duration, motion_rng);
                break;
            case ScriptSegment::Kind::Trace:
                append_trace(m, seg.shape, seg.duration, motion_rng);
                break;
            case ScriptSegment::Kind::Hover:
                m.hold(seg.duration);
                break;
            case ScriptSegment::Kind::NegativeMimic:
                append_mimic(m, seg.location_m, seg.duration, motion_rng);
                break;
        }
    }
    m.hold(script.tail);
    const TimeNs t_end = m.end_time();

    SessionRecording rec;
    RngStream track_rng(seed, {kTrackStream});
    RngStream imu_rng(seed, {kImuStream});
    RngStream plane_rng(seed, {kPlaneStream});
    rec.hand_stream = simulate_tracking(m, profile, true_plane, t_end, track_rng);
    rec.imu_stream = simulate_imu(m, profile, true_plane, t_end, imu_rng);

    // truth events at the exact kinematic boundaries
    struct Pending {
        TimeNs t;
        int rank; // keeps starts before downs and ups before ends at equal times
        GroundTruthEvent e;
    };
    std::vector<Pending> pending;
    for (const auto& [on, off] : m.contacts()) {
        GroundTruthEvent down;
        down.t = on;
        down.kind = TruthKind::ContactDown;
        const TruePose p = m.at(on);
        down.pos_mm = Vec2(p.index.x() * 1000.0, p.index.y() * 1000.0);
        pending.push_back({on, 1, down});
        GroundTruthEvent up;
        up.t = off;
        up.kind = TruthKind::ContactUp;
        pending.push_back({off, 2, up});
    }
    for (const GestureInterval& g : m.gestures()) {
        GroundTruthEvent start;
        start.t = g.start;
        start.kind = TruthKind::GestureStart;
        start.gesture = g.gesture;
        pending.push_back({g.start, 0, start});
        GroundTruthEvent end;
        end.t = g.end;
        end.kind = TruthKind::GestureEnd;
        end.gesture = g.gesture;
        pending.push_back({g.end, 3, end});
    }
    std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
        return a.t != b.t ? a.t < b.t : a.rank < b.rank;
    });
    for (Pending& p : pending) rec.truth_stream.push_back(std::move(p.e));

    rec.header.participant = participant;
    rec.header.orientation = orientation;
    rec.header.plane = perturb_plane(true_plane, profile, plane_rng);
    validate_recording(rec);
    return rec;
}

SpatialTask generate_spatial_task(SpatialTask::Kind kind, int trials,
                                  const ParticipantProfile& profile,
                                  const SurfacePlane& true_plane, std::uint64_t seed,
                                  const std::string& participant) {
    if (trials <= 0) throw std::invalid_argument("spatial task needs at least one trial");
    RngStream rng(seed, {kTargetStream});
    const Vec2 tablet = SessionHeader{}.tablet_size_mm;

    SpatialTask task;
    MotionScript script;
    TimeNs cursor = 600 * kMs;
    for (int i = 0; i < trials; ++i) {
        ScriptSegment seg;
        seg.start = cursor;
        if (kind == SpatialTask::Kind::Crosshair) {
            const Vec2 target(rng.uniform(15.0, tablet.x() - 15.0),
                              rng.uniform(15.0, tablet.y() - 15.0));
            task.targets_mm.push_back(target);
            seg.kind = ScriptSegment::Kind::Gesture;
            seg.gesture = GestureClass::SingleTap;
            seg.location_m = target / 1000.0;
            seg.duration = ms_to_ns(rng.uniform(100, 160));
            cursor += 710 * kMs + seg.duration + ms_to_ns(rng.uniform(300, 500));
        } else {
            PathShape shape;
            if (kind == SpatialTask::Kind::PathCircle) {
                const double r = rng.uniform(25.0, 50.0); // diameters 5-10 cm
                const Vec2 c(rng.uniform(r + 10.0, tablet.x() - r - 10.0),
                             rng.uniform(r + 10.0, tablet.y() - r - 10.0));
                shape = PathShape::circle(c, r);
                seg.location_m = (c + Vec2(r, 0)) / 1000.0;
            } else {
                Vec2 a, b;
                for (int attempt = 0;; ++attempt) {
                    const double len = rng.uniform(50.0, 150.0);
                    const double phi = rng.uniform(0.0, 2.0 * M_PI);
                    a = Vec2(rng.uniform(10.0, tablet.x() - 10.0),
                             rng.uniform(10.0, tablet.y() - 10.0));
                    b = a + len * Vec2(std::cos(phi), std::sin(phi));
                    if (b.x() >= 10.0 && b.x() <= tablet.x() - 10.0 && b.y() >= 10.0 &&
                        b.y() <= tablet.y() - 10.0)
                        break;
                    if (attempt > 1000)
                        throw std::logic_error("line placement failed"); // unreachable
                }
                shape = PathShape::segment(a, b);
                seg.location_m = a / 1000.0;
            }
            task.shapes.push_back(shape);
            const double len_mm = shape.kind == PathShape::Kind::Circle
                                      ? 2.0 * M_PI * shape.radius_mm
                                      : (shape.b - shape.a).norm();
            seg.kind = ScriptSegment::Kind::Trace;
            seg.shape = shape;
            seg.duration = static_cast<TimeNs>(len_mm / 1000.0 / kTraceSpeed * 1e9);
            cursor += 710 * kMs + seg.duration + ms_to_ns(rng.uniform(300, 500));
        }
        script.segments.push_back(seg);
    }

    task.session = generate_session(script, profile, true_plane, seed, participant);
    return task;
}

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void scenario_error(int line, const std::string& msg) {
    throw std::invalid_argument("scenario line " + std::to_string(line) + ": " + msg);
}

} // namespace

Scenario parse_scenario(const std::string& text) {
    Scenario sc;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;

        auto need = [&](auto& v) {
            if (!(ls >> v)) scenario_error(line_no, "missing value for '" + key + "'");
        };
        if (key == "participant") {
            need(sc.participant);
        } else if (key == "seed") {
            need(sc.seed);
            sc.profile.seed = sc.seed;
        } else if (key == "orientation") {
            std::string v;
            need(v);
            if (v == "horizontal")
                sc.orientation = SurfaceOrientation::Horizontal;
            else if (v == "vertical")
                sc.orientation = SurfaceOrientation::Vertical;
            else
                scenario_error(line_no, "orientation must be horizontal or vertical");
        } else if (key == "preset") {
            std::string v;
            need(v);
            if (v == "clean")
                sc.profile = ParticipantProfile::clean(sc.seed);
            else if (v == "nominal")
                sc.profile = ParticipantProfile::nominal(sc.seed);
            else
                scenario_error(line_no, "preset must be clean or nominal");
        } else if (key == "hand_scale") {
            need(sc.profile.hand_scale);
        } else if (key == "bias_mm") {
            double x, y, z;
            need(x);
            need(y);
            need(z);
            sc.profile.tracking_bias_m = Vec3(x, y, z) / 1000.0;
        } else if (key == "jitter_mm") {
            double v;
            need(v);
            sc.profile.jitter_sigma_m = v / 1000.0;
        } else if (key == "dropout") {
            need(sc.profile.dropout_rate);
        } else if (key == "tilt_deg") {
            need(sc.profile.plane_tilt_deg);
        } else if (key == "offset_mm") {
            double v;
            need(v);
            sc.profile.plane_offset_m = v / 1000.0;
        } else if (key == "accel_noise") {
            need(sc.profile.accel_noise);
        } else if (key == "gyro_noise") {
            need(sc.profile.gyro_noise);
        } else if (key == "impulse_gain") {
            need(sc.profile.impulse_gain);
        } else if (key == "reps") {
            need(sc.reps);
        } else if (key == "negatives") {
            need(sc.negatives);
        } else if (key == "segment") {
            std::string what;
            need(what);
            ScriptSegment seg;
            double start_ms = 0, dur_ms = 0;
            if (what == "hover" || what == "mimic") {
                double x, y;
                need(x);
                need(y);
                need(start_ms);
                need(dur_ms);
                seg.kind = what == "hover" ? ScriptSegment::Kind::Hover
                                           : ScriptSegment::Kind::NegativeMimic;
                seg.location_m = Vec2(x, y) / 1000.0;
            } else if (what == "line") {
                double ax, ay, bx, by;
                need(ax);
                need(ay);
                need(bx);
                need(by);
                need(start_ms);
                need(dur_ms);
                seg.kind = ScriptSegment::Kind::Trace;
                seg.shape = PathShape::segment(Vec2(ax, ay), Vec2(bx, by));
                seg.location_m = Vec2(ax, ay) / 1000.0;
            } else if (what == "circle") {
                double cx, cy, r;
                need(cx);
                need(cy);
                need(r);
                need(start_ms);
                need(dur_ms);
                seg.kind = ScriptSegment::Kind::Trace;
                seg.shape = PathShape::circle(Vec2(cx, cy), r);
                seg.location_m = Vec2(cx + r, cy) / 1000.0;
            } else {
                double x, y;
                GestureClass g = GestureClass::Negative;
                try {
                    g = gesture_from_name(what);
                } catch (const std::invalid_argument&) {
                    scenario_error(line_no, "unknown segment type '" + what + "'");
                }
                if (g == GestureClass::Negative)
                    scenario_error(line_no, "negative segments are spelled 'mimic'");
                need(x);
                need(y);
                need(start_ms);
                need(dur_ms);
                seg.kind = ScriptSegment::Kind::Gesture;
                seg.gesture = g;
                seg.location_m = Vec2(x, y) / 1000.0;
            }
            seg.start = ms_to_ns(start_ms);
            seg.duration = ms_to_ns(dur_ms);
            sc.segments.push_back(seg);
        } else {
            scenario_error(line_no, "unknown key '" + key + "'");
        }
    }
    return sc;
}

SessionRecording realize_scenario(const Scenario& scenario) {
    const SurfacePlane plane = study_plane(scenario.orientation);
    MotionScript script;
    if (scenario.reps > 0 || scenario.negatives > 0) {
        RngStream rng(scenario.seed, {kScriptStream});
        script = make_gesture_script(scenario.reps, scenario.negatives,
                                     SessionHeader{}.tablet_size_mm, rng);
    } else {
        script.segments = scenario.segments;
    }
    return generate_session(script, scenario.profile, plane, scenario.seed, scenario.participant,
                            scenario.orientation);
}

} // namespace sxr
