// sxr: command-line front end for the SurfaceXR library.
//
//   synth       materialize labeled sessions from a scenario file
//   train       leave-one-participant-out training on a session directory
//   eval        gesture / contact / crosshair / path metric reports
//   replay      stream touch and gesture events for one session
//   bench       per-stage timing of the streaming engine
//   grad-check  finite-difference check of the full model gradient
//
// Every command that writes files also writes a manifest.json beside them
// (command line, inputs, outputs, seeds, config hash, wall-clock duration).
// All data outputs are bit-deterministic for fixed seeds; the manifest's
// duration field is the one exception.

#include "CLI11.hpp"
#include "json.hpp"

#include "sxr/dataset.hpp"
#include "sxr/eval.hpp"
#include "sxr/model.hpp"
#include "sxr/realtime.hpp"
#include "sxr/session.hpp"
#include "sxr/synth.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sxr;

namespace {

constexpr const char* kToolVersion = "sxr 1.0.0";

// ---------------------------------------------------------------------------
// Small file and formatting helpers
// ---------------------------------------------------------------------------
std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("no such file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    out << text;
}

std::string fmt(const char* format, ...) {
    char buf[256];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

std::string hash_hex(std::uint64_t h) { return fmt("0x%016llx", static_cast<unsigned long long>(h)); }

ModelMode parse_mode(const std::string& name) {
    if (name == "multi") return ModelMode::Multi;
    if (name == "hand") return ModelMode::HandOnly;
    if (name == "imu") return ModelMode::ImuOnly;
    return model_mode_from_name(name); // accepts the long spellings too
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------
struct Manifest {
    std::string command;
    std::vector<std::string> argv;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    json seeds = json::object();
    std::optional<std::string> config_hash;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

    void write(const fs::path& dir) const {
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - started)
                              .count();
        json j;
        j["tool"] = kToolVersion;
        j["command"] = command;
        j["argv"] = argv;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["seeds"] = seeds;
        if (config_hash) j["config_hash"] = *config_hash;
        j["duration_ms"] = ms;
        write_text_file(dir / "manifest.json", j.dump(2) + "\n");
    }
};

// ---------------------------------------------------------------------------
// Session corpus loading: a directory of *.sxr files (sorted by name) or a
// single session file.
// ---------------------------------------------------------------------------
struct LoadedSession {
    fs::path path;
    SessionRecording rec;
};

std::vector<LoadedSession> load_sessions(const fs::path& data) {
    std::vector<fs::path> files;
    if (fs::is_directory(data)) {
        for (const auto& entry : fs::directory_iterator(data))
            if (entry.is_regular_file() && entry.path().extension() == ".sxr")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        if (files.empty())
            throw std::runtime_error("no session files (*.sxr) in " + data.string());
    } else if (fs::is_regular_file(data)) {
        files.push_back(data);
    } else {
        throw std::runtime_error("no such file: " + data.string());
    }
    std::vector<LoadedSession> out;
    out.reserve(files.size());
    for (const fs::path& f : files) out.push_back({f, read_session(f)});
    return out;
}

std::vector<std::string> participant_list(const std::vector<LoadedSession>& sessions) {
    std::vector<std::string> ids;
    for (const LoadedSession& s : sessions) ids.push_back(s.rec.header.participant);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

// ---------------------------------------------------------------------------
// Spatial-task sidecars: plain text next to the session file carrying the
// per-trial targets or traced shapes (`<stem>.task`).
// ---------------------------------------------------------------------------
std::string task_sidecar_text(const SpatialTask& task) {
    std::ostringstream out;
    if (task.shapes.empty()) {
        out << "task crosshair\n";
        for (const Vec2& t : task.targets_mm)
            out << fmt("target %.17g %.17g\n", t.x(), t.y());
    } else {
        out << "task path\n";
        for (const PathShape& s : task.shapes) {
            if (s.kind == PathShape::Kind::Segment)
                out << fmt("line %.17g %.17g %.17g %.17g\n", s.a.x(), s.a.y(), s.b.x(), s.b.y());
            else
                out << fmt("circle %.17g %.17g %.17g\n", s.center.x(), s.center.y(), s.radius_mm);
        }
    }
    return out.str();
}

struct SidecarTask {
    std::vector<Vec2> targets_mm;
    std::vector<PathShape> shapes;
};

SidecarTask read_task_sidecar(const fs::path& path) {
    std::istringstream in(read_text_file(path));
    SidecarTask task;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key) || key == "#" || key == "task") continue;
        const auto bad = [&] {
            throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                                     ": malformed task record");
        };
        if (key == "target") {
            double x, y;
            if (!(ls >> x >> y)) bad();
            task.targets_mm.emplace_back(x, y);
        } else if (key == "line") {
            double ax, ay, bx, by;
            if (!(ls >> ax >> ay >> bx >> by)) bad();
            task.shapes.push_back(PathShape::segment(Vec2(ax, ay), Vec2(bx, by)));
        } else if (key == "circle") {
            double cx, cy, r;
            if (!(ls >> cx >> cy >> r)) bad();
            task.shapes.push_back(PathShape::circle(Vec2(cx, cy), r));
        } else {
            bad();
        }
    }
    return task;
}

// ---------------------------------------------------------------------------
// Checkpoint loading with the optional --config cross-check
// ---------------------------------------------------------------------------
Model load_checkpoint(const fs::path& ckpt, const std::string& config_path) {
    if (!fs::is_regular_file(ckpt)) throw std::runtime_error("no such file: " + ckpt.string());
    Model model = load_model(ckpt);
    if (!config_path.empty()) {
        const ModelConfig external = ModelConfig::from_text(read_text_file(config_path));
        if (external.hash() != model.config().hash())
            throw std::runtime_error("config hash mismatch: " + config_path + " is " +
                                     hash_hex(external.hash()) + " but " + ckpt.string() +
                                     " embeds " + hash_hex(model.config().hash()));
    }
    return model;
}

// ---------------------------------------------------------------------------
// Window enumeration shared by train and eval
// ---------------------------------------------------------------------------
std::vector<WindowRef> merged_window_refs(const std::vector<WindowedSession>& windowed,
                                          const std::vector<bool>& selected, bool gesture_task,
                                          bool contact_task) {
    std::vector<WindowRef> refs;
    for (std::size_t i = 0; i < windowed.size(); ++i) {
        if (!selected[i]) continue;
        if (gesture_task)
            for (WindowRef r : window_gesture(windowed[i])) {
                r.session = i;
                refs.push_back(r);
            }
        if (contact_task)
            for (WindowRef r : window_contact(windowed[i])) {
                r.session = i;
                // keep the gesture-task window when both tasks landed on the
                // same start tick (identical tensors, wider label)
                const bool dup = gesture_task && r.start_tick % kGestureStrideTicks == 0;
                if (!dup) refs.push_back(r);
            }
    }
    return refs;
}

// One detected tap per truth trial: nearest unmatched down event within the
// association window, truths processed in time order (the latency rule).
std::vector<std::optional<Vec2>> associate_taps(const std::vector<TouchEvent>& touch,
                                                const std::vector<std::pair<TimeNs, TimeNs>>& trials,
                                                TimeNs window = 500'000'000) {
    std::vector<TouchEvent> downs;
    for (const TouchEvent& e : touch)
        if (e.kind == TouchEvent::Kind::Down) downs.push_back(e);
    std::vector<bool> used(downs.size(), false);
    std::vector<std::optional<Vec2>> detected(trials.size());
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const TimeNs truth = trials[i].first;
        std::ptrdiff_t best = -1;
        TimeNs best_gap = window + 1;
        for (std::size_t d = 0; d < downs.size(); ++d) {
            if (used[d]) continue;
            const TimeNs gap = std::abs(downs[d].t - truth);
            if (gap <= window && gap < best_gap) {
                best_gap = gap;
                best = static_cast<std::ptrdiff_t>(d);
            }
        }
        if (best >= 0) {
            used[static_cast<std::size_t>(best)] = true;
            if (downs[static_cast<std::size_t>(best)].has_pos)
                detected[i] = downs[static_cast<std::size_t>(best)].pos_mm;
        }
    }
    return detected;
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------
std::string gesture_report(const HeldoutMetrics& m, ModelMode mode, bool plane, std::size_t windows) {
    std::ostringstream out;
    out << "task gesture\n";
    out << "mode " << model_mode_name(mode) << "\n";
    out << "frame " << (plane ? "surface" : "head") << "\n";
    out << "windows " << windows << "\n";
    out << fmt("macro_precision %.4f\n", m.gesture.macro_precision);
    out << fmt("macro_recall %.4f\n", m.gesture.macro_recall);
    out << fmt("macro_f1 %.4f\n", m.gesture.macro_f1);
    for (int c = 0; c < m.gesture_cm.classes(); ++c) {
        const ClassScores& s = m.gesture.per_class[static_cast<std::size_t>(c)];
        out << "class " << m.gesture_cm.names()[static_cast<std::size_t>(c)]
            << fmt(" precision %.4f recall %.4f f1 %.4f support %lld", s.precision, s.recall,
                   s.f1, static_cast<long long>(s.support))
            << "\n";
    }
    return out.str();
}

std::string contact_report(const BinaryMetrics& m, ModelMode mode, bool plane, std::size_t windows) {
    std::ostringstream out;
    out << "task contact\n";
    out << "mode " << model_mode_name(mode) << "\n";
    out << "frame " << (plane ? "surface" : "head") << "\n";
    out << "windows " << windows << "\n";
    out << "tp " << m.tp << " fp " << m.fp << " fn " << m.fn << " tn " << m.tn << "\n";
    out << fmt("precision %.4f\n", m.precision);
    out << fmt("recall %.4f\n", m.recall);
    out << fmt("f1 %.4f\n", m.f1);
    return out.str();
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------
int cmd_synth(const std::string& scenario_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed, const std::string& participant, int copies,
              const std::string& spatial, int trials, Manifest& manifest) {
    Scenario scenario = parse_scenario(read_text_file(scenario_path));
    if (seed) scenario.seed = *seed;
    if (!participant.empty()) scenario.participant = participant;
    manifest.inputs.push_back(scenario_path);
    manifest.seeds["scenario"] = scenario.seed;

    fs::create_directories(out_dir);
    for (int c = 0; c < copies; ++c) {
        const std::uint64_t s = scenario.seed + static_cast<std::uint64_t>(c);
        const std::string stem = scenario.participant + fmt("_s%06llu", static_cast<unsigned long long>(s));
        const fs::path session_path = fs::path(out_dir) / (stem + ".sxr");
        if (spatial.empty()) {
            Scenario copy = scenario;
            copy.seed = s;
            write_session(realize_scenario(copy), session_path);
        } else {
            SpatialTask::Kind kind;
            if (spatial == "crosshair")
                kind = SpatialTask::Kind::Crosshair;
            else if (spatial == "line")
                kind = SpatialTask::Kind::PathLine;
            else if (spatial == "circle")
                kind = SpatialTask::Kind::PathCircle;
            else
                throw std::runtime_error("unknown spatial task: " + spatial);
            const SpatialTask task =
                generate_spatial_task(kind, trials, scenario.profile,
                                      study_plane(scenario.orientation), s, scenario.participant);
            write_session(task.session, session_path);
            const fs::path sidecar = fs::path(out_dir) / (stem + ".task");
            write_text_file(sidecar, task_sidecar_text(task));
            manifest.outputs.push_back(sidecar.string());
        }
        manifest.outputs.push_back(session_path.string());
        std::cout << "wrote " << session_path.string() << "\n";
    }
    manifest.write(out_dir);
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------
int cmd_train(const std::string& data_dir, const std::string& config_path, int fold,
              const std::string& out_dir, TrainConfig tc, std::size_t max_per_class,
              Manifest& manifest) {
    const ModelConfig cfg = ModelConfig::from_text(read_text_file(config_path));
    cfg.validate();
    manifest.inputs = {data_dir, config_path};
    manifest.config_hash = hash_hex(cfg.hash());
    manifest.seeds["model"] = cfg.seed;
    manifest.seeds["train"] = tc.seed;

    const std::vector<LoadedSession> loaded = load_sessions(data_dir);
    const std::vector<std::string> participants = participant_list(loaded);
    const SplitPlan plan = lopo_splits(participants);
    if (fold < 0 || fold >= static_cast<int>(plan.folds.size()))
        throw std::runtime_error("fold " + std::to_string(fold) + " out of range (" +
                                 std::to_string(plan.folds.size()) + " folds)");
    const SplitPlan::Fold& split = plan.folds[static_cast<std::size_t>(fold)];

    std::vector<WindowedSession> windowed;
    windowed.reserve(loaded.size());
    std::vector<bool> in_train(loaded.size(), false), in_test(loaded.size(), false);
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        windowed.emplace_back(loaded[i].rec, cfg.features);
        const std::string& p = loaded[i].rec.header.participant;
        in_train[i] = p != split.test;
        in_test[i] = p == split.test;
    }

    std::vector<WindowRef> train_refs = merged_window_refs(windowed, in_train, true, true);
    if (max_per_class > 0) train_refs = subsample_per_class(train_refs, max_per_class);
    std::vector<WindowRef> heldout;
    if (tc.eval_every > 0) heldout = merged_window_refs(windowed, in_test, true, false);

    std::cout << "fold " << fold << ": test participant " << split.test << ", "
              << train_refs.size() << " train windows, " << heldout.size()
              << " held-out windows\n";

    Model model(cfg);
    const TrainResult result = train_loop(model, windowed, train_refs, heldout, tc);

    fs::create_directories(out_dir);
    const fs::path ckpt = fs::path(out_dir) / "model.ckpt";
    const fs::path history = fs::path(out_dir) / "history.csv";
    save_weights(model, ckpt);
    write_text_file(history, result.history_csv());
    manifest.outputs = {ckpt.string(), history.string()};
    manifest.write(out_dir);

    if (!result.history.empty()) {
        const EpochStats& last = result.history.back();
        std::cout << fmt("epoch %d: loss %.4f", last.epoch, last.train_loss);
        if (last.heldout_gesture_f1 == last.heldout_gesture_f1) // not NaN
            std::cout << fmt(", held-out gesture f1 %.4f contact f1 %.4f",
                             last.heldout_gesture_f1, last.heldout_contact_f1);
        std::cout << "\n";
    }
    std::cout << "wrote " << ckpt.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------
int cmd_eval(const std::string& ckpt_path, const std::string& data, const std::string& task,
             ModelMode mode, bool use_plane, const std::string& out_dir,
             const std::string& config_path, Manifest& manifest) {
    const Model model = load_checkpoint(ckpt_path, config_path);
    manifest.inputs = {ckpt_path, data};
    manifest.config_hash = hash_hex(model.config().hash());
    const std::vector<LoadedSession> loaded = load_sessions(data);

    std::string report;
    std::string confusion_csv;

    if (task == "gesture" || task == "contact") {
        std::vector<WindowedSession> windowed;
        windowed.reserve(loaded.size());
        for (const LoadedSession& s : loaded) windowed.emplace_back(s.rec, model.config().features);
        const std::vector<bool> all(loaded.size(), true);
        const std::vector<WindowRef> refs =
            merged_window_refs(windowed, all, task == "gesture", task == "contact");
        const auto frame =
            use_plane ? ReferenceFrame::Mode::Surface : ReferenceFrame::Mode::Head;
        const HeldoutMetrics m = evaluate_windows(model, windowed, refs, mode, frame);
        if (task == "gesture") {
            report = gesture_report(m, mode, use_plane, refs.size());
            confusion_csv = m.gesture_cm.to_csv();
        } else {
            report = contact_report(m.contact, mode, use_plane, refs.size());
        }
    } else if (task == "crosshair" || task == "path") {
        EngineConfig ec;
        ec.mode = mode;
        ec.use_plane = use_plane;
        if (!use_plane) throw std::runtime_error("spatial tasks need the surface plane");
        if (mode == ModelMode::ImuOnly)
            throw std::runtime_error("spatial tasks need hand coordinates (imu mode has none)");

        std::ostringstream out;
        if (task == "crosshair") {
            std::vector<std::optional<Vec2>> detected;
            std::vector<Vec2> targets;
            for (const LoadedSession& s : loaded) {
                const ReplayResult run = replay_session(s.rec, model, ec);
                const auto trials = contact_intervals(s.rec);
                const auto det = associate_taps(run.touch, trials);
                detected.insert(detected.end(), det.begin(), det.end());
                const fs::path sidecar = fs::path(s.path).replace_extension(".task");
                if (fs::exists(sidecar)) {
                    const SidecarTask side = read_task_sidecar(sidecar);
                    targets.insert(targets.end(), side.targets_mm.begin(), side.targets_mm.end());
                } else { // fall back to the truth tap positions
                    for (const GroundTruthEvent& e : s.rec.truth_stream)
                        if (e.kind == TruthKind::ContactDown && e.pos_mm) targets.push_back(*e.pos_mm);
                }
            }
            const CrosshairReport r = crosshair_error(detected, targets);
            out << "task crosshair\n";
            out << "sessions " << loaded.size() << "\n";
            out << "trials " << targets.size() << "\n";
            out << "misses " << r.misses << "\n";
            out << fmt("mean_mm %.4f\n", r.mean_mm);
            out << fmt("sd_mm %.4f\n", r.sd_mm);
            for (std::size_t i = 0; i < r.per_trial_mm.size(); ++i)
                out << fmt("trial %zu %.4f\n", i, r.per_trial_mm[i]);
        } else {
            std::vector<double> errors;
            int misses = 0;
            std::size_t trial_count = 0;
            for (const LoadedSession& s : loaded) {
                const fs::path sidecar = fs::path(s.path).replace_extension(".task");
                if (!fs::exists(sidecar))
                    throw std::runtime_error("path task needs a .task sidecar next to " +
                                             s.path.string());
                const SidecarTask side = read_task_sidecar(sidecar);
                const ReplayResult run = replay_session(s.rec, model, ec);
                const auto trials = contact_intervals(s.rec);
                if (side.shapes.size() != trials.size())
                    throw std::runtime_error(sidecar.string() + ": " +
                                             std::to_string(side.shapes.size()) + " shapes for " +
                                             std::to_string(trials.size()) + " trials");
                trial_count += trials.size();
                for (std::size_t i = 0; i < trials.size(); ++i) {
                    std::vector<Vec2> points;
                    for (const TouchEvent& e : run.touch)
                        if (e.has_pos && e.t >= trials[i].first && e.t <= trials[i].second)
                            points.push_back(e.pos_mm);
                    if (points.size() < 2) {
                        ++misses;
                        continue;
                    }
                    errors.push_back(path_trace_error(points, side.shapes[i]));
                }
            }
            double mean = 0.0;
            for (double e : errors) mean += e;
            if (!errors.empty()) mean /= static_cast<double>(errors.size());
            out << "task path\n";
            out << "sessions " << loaded.size() << "\n";
            out << "trials " << trial_count << "\n";
            out << "misses " << misses << "\n";
            out << fmt("mean_mm %.4f\n", mean);
            for (std::size_t i = 0; i < errors.size(); ++i)
                out << fmt("trial %zu %.4f\n", i, errors[i]);
        }
        report = out.str();
    } else {
        throw std::runtime_error("unknown task: " + task);
    }

    std::cout << report;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        const fs::path rpt = fs::path(out_dir) / (task + "_report.txt");
        write_text_file(rpt, report);
        manifest.outputs.push_back(rpt.string());
        if (!confusion_csv.empty()) {
            const fs::path csv = fs::path(out_dir) / "gesture_confusion.csv";
            write_text_file(csv, confusion_csv);
            manifest.outputs.push_back(csv.string());
        }
        manifest.write(out_dir);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// replay
// ---------------------------------------------------------------------------
TimeNs line_timestamp(const std::string& line) {
    // lines are "event <t_ns> ..."
    return std::strtoll(line.c_str() + 6, nullptr, 10);
}

int cmd_replay(const std::string& ckpt_path, const std::string& session_path, ModelMode mode,
               bool use_plane, bool realtime, bool latency, const std::string& config_path,
               const std::string& out_file) {
    const Model model = load_checkpoint(ckpt_path, config_path);
    if (!fs::is_regular_file(session_path))
        throw std::runtime_error("no such file: " + session_path);
    const SessionRecording rec = read_session(session_path);
    EngineConfig ec;
    ec.mode = mode;
    ec.use_plane = use_plane;

    const ReplayResult run = replay_session(rec, model, ec);

    if (realtime && !run.lines.empty()) {
        const TimeNs t0 = line_timestamp(run.lines.front());
        const auto start = std::chrono::steady_clock::now();
        for (const std::string& line : run.lines) {
            const TimeNs dt = line_timestamp(line) - t0;
            std::this_thread::sleep_until(start + std::chrono::nanoseconds(dt));
            std::cout << line << "\n" << std::flush;
        }
    } else {
        for (const std::string& line : run.lines) std::cout << line << "\n";
    }

    if (latency) {
        std::vector<TimeNs> det_down, det_up, truth_down, truth_up;
        for (const TouchEvent& e : run.touch) {
            if (e.kind == TouchEvent::Kind::Down) det_down.push_back(e.t);
            if (e.kind == TouchEvent::Kind::Up) det_up.push_back(e.t);
        }
        for (const auto& [down, up] : contact_intervals(rec)) {
            truth_down.push_back(down);
            truth_up.push_back(up);
        }
        const LatencyStats stats = latency_stats(det_down, det_up, truth_down, truth_up);
        std::cout << "# steps " << run.steps << "\n";
        if (stats.median_onset_ms)
            std::cout << fmt("# onset_ms %.3f\n", *stats.median_onset_ms);
        if (stats.median_offset_ms)
            std::cout << fmt("# offset_ms %.3f\n", *stats.median_offset_ms);
        std::cout << fmt("# miss_rate %.4f\n", stats.miss_rate);
        std::cout << fmt("# false_positive_rate %.4f\n", stats.false_positive_rate);
        std::cout << "# matched " << stats.matched_onsets << " onsets " << stats.matched_offsets
                  << " offsets\n";
    }

    if (!out_file.empty()) {
        std::ostringstream text;
        for (const std::string& line : run.lines) text << line << "\n";
        write_text_file(out_file, text.str());
    }
    return 0;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------
int cmd_bench(const std::string& ckpt_path, ModelMode mode, int reps, std::uint64_t seed,
              const std::string& config_path) {
    const Model model = load_checkpoint(ckpt_path, config_path);
    Scenario scenario;
    scenario.participant = "bench";
    scenario.seed = seed;
    scenario.profile = ParticipantProfile::nominal(seed);
    scenario.reps = reps;
    scenario.negatives = reps;
    const SessionRecording rec = realize_scenario(scenario);

    EngineConfig ec;
    ec.mode = mode;
    const ReplayResult run = replay_session(rec, model, ec);
    const StageTiming& t = run.timing;
    const double n = t.steps > 0 ? static_cast<double>(t.steps) : 1.0;
    std::cout << "bench: " << t.steps << " steps over "
              << fmt("%.1f s of session", static_cast<double>(session_end_time(rec)) / 1e9)
              << " (" << model_mode_name(mode) << ")\n";
    std::cout << fmt("featurize   mean %7.3f ms   total %9.1f ms\n", t.featurize_ms / n,
                     t.featurize_ms);
    std::cout << fmt("forward     mean %7.3f ms   total %9.1f ms\n", t.forward_ms / n,
                     t.forward_ms);
    std::cout << fmt("postprocess mean %7.3f ms   total %9.1f ms\n", t.postprocess_ms / n,
                     t.postprocess_ms);
    std::cout << fmt("step        mean %7.3f ms   max %7.3f ms   budget 16.667 ms\n",
                     t.mean_step_ms(), t.max_step_ms);
    return 0;
}

// ---------------------------------------------------------------------------
// grad-check
// ---------------------------------------------------------------------------
int cmd_grad_check(const std::string& config_path, double eps, double tol, int samples,
                   std::uint64_t seed) {
    ModelConfig cfg = ModelConfig::tiny();
    if (!config_path.empty()) cfg = ModelConfig::from_text(read_text_file(config_path));
    cfg.validate();
    Model model(cfg);

    RngStream rng(seed, {0xF1});
    Tensor hand({kHandWindowLen, kHandFeatures, 3, kHandFingers});
    Tensor imu({kImuWindowLen, kImuChannels, kImuComponents});
    for (std::int64_t i = 0; i < hand.size(); ++i) hand.flat(i) = 0.5 * rng.next_gauss();
    for (std::int64_t i = 0; i < imu.size(); ++i) imu.flat(i) = 0.5 * rng.next_gauss();
    std::array<bool, kHandWindowLen> contact{};
    for (int i = 0; i < kHandWindowLen; ++i) contact[static_cast<std::size_t>(i)] = rng.next_bool(0.5);
    const auto gesture =
        static_cast<GestureClass>(rng.uniform_int(static_cast<std::uint64_t>(kGestureClassCount)));
    const LossWeights weights = LossWeights::unit();

    // analytic gradients once
    Model::Workspace ws;
    const Model::Output out = model.forward(hand, imu, ws);
    Model::Output grads;
    grads.contact_logits = Tensor(out.contact_logits.shape());
    grads.gesture_logits = Tensor(out.gesture_logits.shape());
    const double loss0 =
        total_loss(out, std::span<const bool>(contact.data(), contact.size()), gesture, weights,
                   0.5, &grads);
    model.zero_grads();
    model.backward(ws, grads);

    const auto loss_fn = [&]() {
        Model::Workspace w;
        const Model::Output o = model.forward(hand, imu, w);
        return total_loss(o, std::span<const bool>(contact.data(), contact.size()), gesture,
                          weights, 0.5);
    };

    std::vector<nn::Param*> params = model.params();
    std::int64_t total = 0;
    for (const nn::Param* p : params) total += p->value.size();
    const std::int64_t n = std::min<std::int64_t>(samples, total);

    double max_rel = 0.0;
    for (std::int64_t k = 0; k < n; ++k) {
        std::int64_t idx = k * total / n;
        for (nn::Param* p : params) {
            if (idx < p->value.size()) {
                const double rel = nn::grad_check_max_rel(
                    loss_fn, std::span<double>(p->value.data() + idx, 1),
                    std::span<const double>(p->grad.data() + idx, 1), eps);
                max_rel = std::max(max_rel, rel);
                break;
            }
            idx -= p->value.size();
        }
    }

    std::cout << fmt("grad-check: loss %.6f, max relative error %.3e over %lld coordinates"
                     " (eps %.1e)\n",
                     loss0, max_rel, static_cast<long long>(n), eps);
    if (max_rel > tol) {
        std::cerr << fmt("grad-check failed: %.3e exceeds tolerance %.1e\n", max_rel, tol);
        return 4;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SurfaceXR sensor-fusion toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "materialize sessions from a scenario file");
    std::string sy_scenario, sy_out = "out", sy_participant, sy_spatial;
    std::optional<std::uint64_t> sy_seed;
    int sy_copies = 1, sy_trials = 25;
    synth->add_option("scenario", sy_scenario, "scenario text file")->required();
    synth->add_option("out", sy_out, "output directory")->required();
    synth->add_option("--seed", sy_seed, "override the scenario seed");
    synth->add_option("--participant", sy_participant, "override the participant id");
    synth->add_option("--copies", sy_copies, "sessions to generate (seed, seed+1, ...)")
        ->check(CLI::PositiveNumber);
    synth->add_option("--spatial", sy_spatial, "spatial task instead of the script")
        ->check(CLI::IsMember({"crosshair", "line", "circle"}));
    synth->add_option("--trials", sy_trials, "spatial task trials")->check(CLI::PositiveNumber);

    // ---- train ----
    auto* train = app.add_subcommand("train", "LOPO training on a session directory");
    std::string tr_data, tr_config, tr_out = "run";
    int tr_fold = 0;
    std::size_t tr_max_per_class = 0;
    std::string tr_mode = "multi";
    bool tr_no_plane = false;
    TrainConfig tc;
    tc.epochs = 25;
    tc.batch_size = 64;
    tc.eval_every = 0;
    train->add_option("data", tr_data, "directory of *.sxr sessions")->required();
    train->add_option("config", tr_config, "model config text file")->required();
    train->add_option("--fold", tr_fold, "LOPO fold index (participants sorted)");
    train->add_option("--out", tr_out, "output directory");
    train->add_option("--epochs", tc.epochs)->check(CLI::PositiveNumber);
    train->add_option("--batch", tc.batch_size)->check(CLI::PositiveNumber);
    train->add_option("--lr", tc.lr);
    train->add_option("--seed", tc.seed, "shuffle/dropout seed");
    train->add_option("--eval-every", tc.eval_every, "epochs between held-out evals (0 = off)");
    train->add_option("--contact-weight", tc.contact_term_weight);
    train->add_option("--max-per-class", tr_max_per_class, "cap training windows per class");
    train->add_option("--mode", tr_mode)->check(CLI::IsMember({"multi", "hand", "imu"}));
    train->add_flag("--no-plane", tr_no_plane, "head-frame features (no surface registration)");

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "metric reports for a trained checkpoint");
    std::string ev_ckpt, ev_data, ev_task, ev_mode = "multi", ev_out, ev_config;
    bool ev_no_plane = false;
    eval->add_option("ckpt", ev_ckpt, "model checkpoint")->required();
    eval->add_option("data", ev_data, "session file or directory")->required();
    eval->add_option("--task", ev_task, "gesture | contact | crosshair | path")
        ->required()
        ->check(CLI::IsMember({"gesture", "contact", "crosshair", "path"}));
    eval->add_option("--mode", ev_mode)->check(CLI::IsMember({"multi", "hand", "imu"}));
    eval->add_flag("--no-plane", ev_no_plane, "head-frame features (no surface registration)");
    eval->add_option("--out", ev_out, "write reports into this directory");
    eval->add_option("--config", ev_config, "cross-check the checkpoint's config hash");

    // ---- replay ----
    auto* replay = app.add_subcommand("replay", "stream events for one session");
    std::string rp_ckpt, rp_session, rp_mode = "multi", rp_config, rp_out;
    bool rp_no_plane = false, rp_realtime = false, rp_latency = false;
    replay->add_option("ckpt", rp_ckpt, "model checkpoint")->required();
    replay->add_option("session", rp_session, "session file")->required();
    replay->add_option("--mode", rp_mode)->check(CLI::IsMember({"multi", "hand", "imu"}));
    replay->add_flag("--no-plane", rp_no_plane, "head-frame features (no surface registration)");
    replay->add_flag("--realtime", rp_realtime, "pace event emission to the timestamps");
    replay->add_flag("--latency", rp_latency, "append a latency summary (comment lines)");
    replay->add_option("--config", rp_config, "cross-check the checkpoint's config hash");
    replay->add_option("--out", rp_out, "also write the event lines to a file");

    // ---- bench ----
    auto* bench = app.add_subcommand("bench", "per-stage timing of the streaming engine");
    std::string be_ckpt, be_mode = "multi", be_config;
    int be_reps = 1;
    std::uint64_t be_seed = 1;
    bench->add_option("ckpt", be_ckpt, "model checkpoint")->required();
    bench->add_option("--mode", be_mode)->check(CLI::IsMember({"multi", "hand", "imu"}));
    bench->add_option("--reps", be_reps, "gesture reps in the generated session")
        ->check(CLI::PositiveNumber);
    bench->add_option("--seed", be_seed, "generated session seed");
    bench->add_option("--config", be_config, "cross-check the checkpoint's config hash");

    // ---- config ----
    auto* config = app.add_subcommand("config", "print a model config (redirect to a file)");
    bool cf_tiny = false;
    std::uint64_t cf_seed = 1;
    config->add_flag("--tiny", cf_tiny, "narrow test/desk-scale variant");
    config->add_option("--seed", cf_seed, "weight initialization seed");

    // ---- grad-check ----
    auto* gc = app.add_subcommand("grad-check", "finite-difference model gradient check");
    std::string gc_config;
    double gc_eps = 1e-4, gc_tol = 1e-4;
    int gc_samples = 200;
    std::uint64_t gc_seed = 7;
    gc->add_option("config", gc_config, "model config text file (default: tiny)");
    gc->add_option("--eps", gc_eps, "finite-difference step");
    gc->add_option("--tol", gc_tol, "max relative error tolerance");
    gc->add_option("--samples", gc_samples, "parameter coordinates to probe")
        ->check(CLI::PositiveNumber);
    gc->add_option("--seed", gc_seed, "input/label seed");

    CLI11_PARSE(app, argc, argv);

    Manifest manifest;
    for (int i = 0; i < argc; ++i) manifest.argv.emplace_back(argv[i]);

    try {
        if (*synth) {
            manifest.command = "synth";
            return cmd_synth(sy_scenario, sy_out, sy_seed, sy_participant, sy_copies, sy_spatial,
                             sy_trials, manifest);
        }
        if (*train) {
            manifest.command = "train";
            tc.mode = parse_mode(tr_mode);
            tc.frame_mode =
                tr_no_plane ? ReferenceFrame::Mode::Head : ReferenceFrame::Mode::Surface;
            return cmd_train(tr_data, tr_config, tr_fold, tr_out, tc, tr_max_per_class, manifest);
        }
        if (*eval) {
            manifest.command = "eval";
            return cmd_eval(ev_ckpt, ev_data, ev_task, parse_mode(ev_mode), !ev_no_plane, ev_out,
                            ev_config, manifest);
        }
        if (*replay) {
            return cmd_replay(rp_ckpt, rp_session, parse_mode(rp_mode), !rp_no_plane, rp_realtime,
                              rp_latency, rp_config, rp_out);
        }
        if (*bench) {
            return cmd_bench(be_ckpt, parse_mode(be_mode), be_reps, be_seed, be_config);
        }
        if (*config) {
            ModelConfig cfg = cf_tiny ? ModelConfig::tiny() : ModelConfig{};
            cfg.seed = cf_seed;
            std::cout << cfg.to_text();
            return 0;
        }
        if (*gc) {
            return cmd_grad_check(gc_config, gc_eps, gc_tol, gc_samples, gc_seed);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
