#include "sxr/session.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sxr {

namespace {

// 17 significant digits: doubles survive a text round trip bit-exactly.
void append_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

void append_vec3(std::string& out, const Vec3& v) {
    for (int i = 0; i < 3; ++i) {
        out += ' ';
        append_double(out, v[i]);
    }
}

class LineTokens {
public:
    LineTokens(const std::string& line, int line_no) : line_no_(line_no) {
        std::istringstream is(line);
        std::string tok;
        while (is >> tok) tokens_.push_back(std::move(tok));
    }

    bool empty() const { return tokens_.empty(); }
    std::size_t size() const { return tokens_.size(); }
    int line_no() const { return line_no_; }

    const std::string& str(std::size_t i) const {
        if (i >= tokens_.size()) fail("missing field");
        return tokens_[i];
    }

    double num(std::size_t i) const {
        const std::string& s = str(i);
        char* end = nullptr;
        double v = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || *end != '\0') fail("bad number '" + s + "'");
        return v;
    }

    std::int64_t integer(std::size_t i) const {
        const std::string& s = str(i);
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            fail("bad integer '" + s + "'");
        return v;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw std::invalid_argument("parse error line " + std::to_string(line_no_) + ": " + what);
    }

private:
    std::vector<std::string> tokens_;
    int line_no_;
};

std::string_view orientation_name(SurfaceOrientation o) {
    return o == SurfaceOrientation::Horizontal ? "horizontal" : "vertical";
}

SurfaceOrientation orientation_from_name(std::string_view s) {
    if (s == "horizontal") return SurfaceOrientation::Horizontal;
    if (s == "vertical") return SurfaceOrientation::Vertical;
    throw std::invalid_argument("unknown surface orientation: " + std::string(s));
}

template <typename Stream, typename GetT>
void check_sorted(const Stream& stream, GetT get_t, const char* name) {
    for (std::size_t i = 1; i < stream.size(); ++i) {
        if (get_t(stream[i]) < get_t(stream[i - 1]))
            throw std::invalid_argument(std::string("stream not sorted: ") + name + " line " +
                                        std::to_string(i + 1));
    }
}

} // namespace

std::string_view truth_kind_name(TruthKind kind) {
    switch (kind) {
        case TruthKind::ContactDown: return "contact_down";
        case TruthKind::ContactUp: return "contact_up";
        case TruthKind::GestureStart: return "gesture_start";
        case TruthKind::GestureEnd: return "gesture_end";
    }
    throw std::logic_error("bad truth kind");
}

TruthKind truth_kind_from_name(std::string_view name) {
    if (name == "contact_down") return TruthKind::ContactDown;
    if (name == "contact_up") return TruthKind::ContactUp;
    if (name == "gesture_start") return TruthKind::GestureStart;
    if (name == "gesture_end") return TruthKind::GestureEnd;
    throw std::invalid_argument("unknown truth kind: " + std::string(name));
}

void validate_recording(const SessionRecording& recording) {
    const SessionHeader& h = recording.header;
    validate_plane(h.plane);
    if (h.hand_rate_hz != kHandRateHz || h.imu_rate_hz != kImuRateHz)
        throw std::invalid_argument("header rates must be 60 Hz (hand) and 200 Hz (IMU)");
    if (h.tablet_size_mm.x() <= 0 || h.tablet_size_mm.y() <= 0)
        throw std::invalid_argument("tablet size must be positive");

    check_sorted(recording.hand_stream, [](const HandFrame& f) { return f.t; }, "hand");
    check_sorted(recording.imu_stream, [](const ImuSample& s) { return s.t; }, "imu");
    check_sorted(recording.truth_stream, [](const GroundTruthEvent& e) { return e.t; }, "truth");

    std::size_t joint_count = recording.hand_stream.empty()
                                  ? static_cast<std::size_t>(kHandJointCount)
                                  : recording.hand_stream.front().joints.size();
    for (std::size_t i = 0; i < recording.hand_stream.size(); ++i) {
        const HandFrame& f = recording.hand_stream[i];
        if (f.t < 0) throw std::invalid_argument("hand frame " + std::to_string(i) + ": negative timestamp");
        if (f.joints.size() != joint_count ||
            f.joints.size() < static_cast<std::size_t>(kHandJointCount))
            throw std::invalid_argument("hand frame " + std::to_string(i) + ": joint count mismatch");
        if (std::abs(f.head_orientation.norm() - 1.0) > 1e-6)
            throw std::invalid_argument("hand frame " + std::to_string(i) +
                                        ": head orientation is not a unit quaternion");
        for (const Vec3& j : f.joints)
            if (!j.allFinite())
                throw std::invalid_argument("hand frame " + std::to_string(i) + ": non-finite joint");
    }
    for (std::size_t i = 0; i < recording.imu_stream.size(); ++i) {
        const ImuSample& s = recording.imu_stream[i];
        if (s.t < 0) throw std::invalid_argument("imu sample " + std::to_string(i) + ": negative timestamp");
        if (!s.accel.allFinite() || !s.gyro.allFinite())
            throw std::invalid_argument("imu sample " + std::to_string(i) + ": non-finite value");
    }

    // down/up and start/end strictly alternate; positions inside tablet bounds
    bool in_contact = false, in_gesture = false;
    for (std::size_t i = 0; i < recording.truth_stream.size(); ++i) {
        const GroundTruthEvent& e = recording.truth_stream[i];
        switch (e.kind) {
            case TruthKind::ContactDown:
                if (in_contact)
                    throw std::invalid_argument("truth event " + std::to_string(i) +
                                                ": contact_down while already in contact");
                in_contact = true;
                break;
            case TruthKind::ContactUp:
                if (!in_contact)
                    throw std::invalid_argument("truth event " + std::to_string(i) +
                                                ": contact_up without contact_down");
                in_contact = false;
                break;
            case TruthKind::GestureStart:
                if (in_gesture)
                    throw std::invalid_argument("truth event " + std::to_string(i) +
                                                ": gesture_start while a gesture is active");
                if (!e.gesture)
                    throw std::invalid_argument("truth event " + std::to_string(i) +
                                                ": gesture_start without a gesture class");
                in_gesture = true;
                break;
            case TruthKind::GestureEnd:
                if (!in_gesture)
                    throw std::invalid_argument("truth event " + std::to_string(i) +
                                                ": gesture_end without gesture_start");
                in_gesture = false;
                break;
        }
        if (e.pos_mm) {
            const Vec2& p = *e.pos_mm;
            if (p.x() < 0 || p.y() < 0 || p.x() > h.tablet_size_mm.x() || p.y() > h.tablet_size_mm.y())
                throw std::invalid_argument("truth event " + std::to_string(i) +
                                            ": position outside tablet bounds");
        }
    }
}

void write_session(const SessionRecording& recording, const std::filesystem::path& path) {
    validate_recording(recording);
    const SessionHeader& h = recording.header;

    std::string out;
    out.reserve(64 * (recording.hand_stream.size() + recording.imu_stream.size() +
                      recording.truth_stream.size() + 1));

    out += "header ";
    out += std::to_string(h.version);
    out += ' ';
    out += h.participant;
    out += ' ';
    out += orientation_name(h.orientation);
    append_vec3(out, h.plane.origin);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            out += ' ';
            append_double(out, h.plane.basis(r, c));
        }
    out += ' ';
    append_double(out, h.tablet_size_mm.x());
    out += ' ';
    append_double(out, h.tablet_size_mm.y());
    out += '\n';

    // streams are written merged in time order to keep the file replayable
    std::size_t ih = 0, ii = 0, it = 0;
    auto next_t = [&](std::size_t idx, auto& stream) {
        return idx < stream.size() ? stream[idx].t : std::numeric_limits<TimeNs>::max();
    };
    while (ih < recording.hand_stream.size() || ii < recording.imu_stream.size() ||
           it < recording.truth_stream.size()) {
        TimeNs th = next_t(ih, recording.hand_stream);
        TimeNs ti = next_t(ii, recording.imu_stream);
        TimeNs tt = next_t(it, recording.truth_stream);
        if (th <= ti && th <= tt) {
            const HandFrame& f = recording.hand_stream[ih++];
            out += "hand ";
            out += std::to_string(f.t);
            out += ' ';
            out += std::to_string(f.joints.size());
            for (const Vec3& j : f.joints) append_vec3(out, j);
            append_vec3(out, f.head_position);
            out += ' ';
            append_double(out, f.head_orientation.w());
            out += ' ';
            append_double(out, f.head_orientation.x());
            out += ' ';
            append_double(out, f.head_orientation.y());
            out += ' ';
            append_double(out, f.head_orientation.z());
            out += f.tracked ? " 1\n" : " 0\n";
        } else if (ti <= tt) {
            const ImuSample& s = recording.imu_stream[ii++];
            out += "imu ";
            out += std::to_string(s.t);
            append_vec3(out, s.accel);
            append_vec3(out, s.gyro);
            out += '\n';
        } else {
            const GroundTruthEvent& e = recording.truth_stream[it++];
            out += "truth ";
            out += std::to_string(e.t);
            out += ' ';
            out += truth_kind_name(e.kind);
            if (e.gesture) {
                out += ' ';
                out += gesture_name(*e.gesture);
            }
            if (e.pos_mm) {
                out += ' ';
                append_double(out, e.pos_mm->x());
                out += ' ';
                append_double(out, e.pos_mm->y());
            }
            out += '\n';
        }
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

SessionRecording read_session(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open session file: " + path.string());

    SessionRecording rec;
    std::string line;
    int line_no = 0;
    bool saw_header = false;
    // per-stream source line, for "stream not sorted" diagnostics
    TimeNs last_hand = -1, last_imu = -1, last_truth = -1;

    while (std::getline(f, line)) {
        ++line_no;
        LineTokens tok(line, line_no);
        if (tok.empty()) continue;
        const std::string& kind = tok.str(0);

        if (kind == "header") {
            if (saw_header) tok.fail("duplicate header");
            saw_header = true;
            SessionHeader& h = rec.header;
            h.version = static_cast<int>(tok.integer(1));
            h.participant = tok.str(2);
            h.orientation = orientation_from_name(tok.str(3));
            for (int i = 0; i < 3; ++i) h.plane.origin[i] = tok.num(4 + static_cast<std::size_t>(i));
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    h.plane.basis(r, c) = tok.num(7 + static_cast<std::size_t>(r * 3 + c));
            h.tablet_size_mm.x() = tok.num(16);
            h.tablet_size_mm.y() = tok.num(17);
            continue;
        }
        if (!saw_header) tok.fail("record before header");

        if (kind == "hand") {
            HandFrame frame;
            frame.t = tok.integer(1);
            if (frame.t < last_hand)
                throw std::invalid_argument("stream not sorted: hand line " + std::to_string(line_no));
            last_hand = frame.t;
            auto joints = tok.integer(2);
            if (joints < kHandJointCount || joints > 64) tok.fail("bad joint count");
            std::size_t at = 3;
            frame.joints.resize(static_cast<std::size_t>(joints));
            for (auto& j : frame.joints)
                for (int i = 0; i < 3; ++i) j[i] = tok.num(at++);
            for (int i = 0; i < 3; ++i) frame.head_position[i] = tok.num(at++);
            frame.head_orientation.w() = tok.num(at++);
            frame.head_orientation.x() = tok.num(at++);
            frame.head_orientation.y() = tok.num(at++);
            frame.head_orientation.z() = tok.num(at++);
            frame.tracked = tok.integer(at++) != 0;
            if (at != tok.size()) tok.fail("trailing fields");
            rec.hand_stream.push_back(std::move(frame));
        } else if (kind == "imu") {
            ImuSample s;
            s.t = tok.integer(1);
            if (s.t < last_imu)
                throw std::invalid_argument("stream not sorted: imu line " + std::to_string(line_no));
            last_imu = s.t;
            for (int i = 0; i < 3; ++i) s.accel[i] = tok.num(2 + static_cast<std::size_t>(i));
            for (int i = 0; i < 3; ++i) s.gyro[i] = tok.num(5 + static_cast<std::size_t>(i));
            if (tok.size() != 8) tok.fail("imu record needs 6 values");
            rec.imu_stream.push_back(s);
        } else if (kind == "truth") {
            GroundTruthEvent e;
            e.t = tok.integer(1);
            if (e.t < last_truth)
                throw std::invalid_argument("stream not sorted: truth line " + std::to_string(line_no));
            last_truth = e.t;
            e.kind = truth_kind_from_name(tok.str(2));
            std::size_t at = 3;
            if (e.kind == TruthKind::GestureStart || e.kind == TruthKind::GestureEnd)
                e.gesture = gesture_from_name(tok.str(at++));
            if (at + 2 <= tok.size()) {
                Vec2 p;
                p.x() = tok.num(at++);
                p.y() = tok.num(at++);
                e.pos_mm = p;
            }
            if (at != tok.size()) tok.fail("trailing fields");
            rec.truth_stream.push_back(e);
        } else {
            tok.fail("unknown record kind '" + kind + "'");
        }
    }
    if (!saw_header) throw std::invalid_argument("parse error: missing header");
    validate_recording(rec);
    return rec;
}

SyncedLog synchronize(const SessionRecording& recording) {
    if (recording.imu_stream.empty())
        throw std::invalid_argument("synchronize requires a non-empty IMU stream");

    SyncedLog log;
    log.start = recording.imu_stream.front().t;
    log.period = kMasterPeriodNs;
    const TimeNs end = recording.imu_stream.back().t;
    const std::size_t n_ticks = static_cast<std::size_t>((end - log.start) / log.period) + 1;
    log.ticks.resize(n_ticks);

    std::size_t ih = 0, ii = 0, it = 0;
    bool contact = false;
    GestureClass gesture = GestureClass::Negative;
    for (std::size_t k = 0; k < n_ticks; ++k) {
        SyncedTick& tick = log.ticks[k];
        tick.t = log.start + static_cast<TimeNs>(k) * log.period;
        while (ih < recording.hand_stream.size() && recording.hand_stream[ih].t <= tick.t) ++ih;
        while (ii < recording.imu_stream.size() && recording.imu_stream[ii].t <= tick.t) ++ii;
        while (it < recording.truth_stream.size() && recording.truth_stream[it].t <= tick.t) {
            const GroundTruthEvent& e = recording.truth_stream[it];
            switch (e.kind) {
                case TruthKind::ContactDown: contact = true; break;
                case TruthKind::ContactUp: contact = false; break;
                case TruthKind::GestureStart: gesture = e.gesture.value_or(GestureClass::Negative); break;
                case TruthKind::GestureEnd: gesture = GestureClass::Negative; break;
            }
            ++it;
        }
        tick.hand_idx = ih > 0 ? static_cast<std::int32_t>(ih - 1) : -1;
        tick.imu_idx = ii > 0 ? static_cast<std::int32_t>(ii - 1) : -1;
        tick.contact = contact;
        tick.gesture = gesture;
    }
    return log;
}

std::vector<HandFrame> dedupe_hand(const SessionRecording& recording,
                                   std::span<const SyncedTick> ticks) {
    std::vector<HandFrame> frames;
    std::int32_t last = -1;
    for (const SyncedTick& tick : ticks) {
        if (tick.hand_idx >= 0 && tick.hand_idx != last) {
            frames.push_back(recording.hand_stream[static_cast<std::size_t>(tick.hand_idx)]);
            last = tick.hand_idx;
        }
    }
    return frames;
}

TimeNs session_end_time(const SessionRecording& recording) {
    TimeNs end = std::numeric_limits<TimeNs>::min();
    if (!recording.hand_stream.empty()) end = std::max(end, recording.hand_stream.back().t);
    if (!recording.imu_stream.empty()) end = std::max(end, recording.imu_stream.back().t);
    if (!recording.truth_stream.empty()) end = std::max(end, recording.truth_stream.back().t);
    if (end == std::numeric_limits<TimeNs>::min())
        throw std::invalid_argument("session has no samples");
    return end;
}

std::vector<std::pair<TimeNs, TimeNs>> contact_intervals(const SessionRecording& recording) {
    std::vector<std::pair<TimeNs, TimeNs>> out;
    bool open = false;
    TimeNs start = 0;
    for (const GroundTruthEvent& e : recording.truth_stream) {
        if (e.kind == TruthKind::ContactDown) {
            open = true;
            start = e.t;
        } else if (e.kind == TruthKind::ContactUp && open) {
            out.emplace_back(start, e.t);
            open = false;
        }
    }
    if (open) out.emplace_back(start, session_end_time(recording));
    return out;
}

std::vector<GestureInterval> gesture_intervals(const SessionRecording& recording) {
    std::vector<GestureInterval> out;
    bool open = false;
    GestureInterval cur;
    for (const GroundTruthEvent& e : recording.truth_stream) {
        if (e.kind == TruthKind::GestureStart) {
            cur = GestureInterval{e.t, e.t, e.gesture.value_or(GestureClass::Negative)};
            open = true;
        } else if (e.kind == TruthKind::GestureEnd && open) {
            cur.end = e.t;
            out.push_back(cur);
            open = false;
        }
    }
    if (open) {
        cur.end = session_end_time(recording);
        out.push_back(cur);
    }
    return out;
}

bool contact_state_at(std::span<const std::pair<TimeNs, TimeNs>> intervals, TimeNs t) {
    auto it = std::upper_bound(intervals.begin(), intervals.end(), t,
                               [](TimeNs v, const auto& iv) { return v < iv.first; });
    if (it == intervals.begin()) return false;
    --it;
    return t < it->second; // state flips exactly at the up event
}

} // namespace sxr
