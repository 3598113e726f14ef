#pragma once

// Study protocol: counterbalanced condition orders, trial chains with the
// distance-pair quota, simulated sessions, and the trial-record table.

#include <algorithm>
#include <array>
#include <cstdint>
#include <future>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vwm/agents.hpp"
#include "vwm/interaction.hpp"
#include "vwm/random.hpp"
#include "vwm/scene.hpp"

namespace vwm {

inline constexpr int kTrialsPerCondition = 60;
inline constexpr int kTrainingTrials = 5;
inline constexpr int kDiscardedTrials = 3;
inline constexpr int kLeadingTrials = kTrainingTrials + kDiscardedTrials;
inline constexpr int kRecordedTrials = kTrialsPerCondition - kLeadingTrials;  // 52
inline constexpr int kTrialsPerPair = kRecordedTrials / 4;                    // 13

/// Williams design: row i is the base sequence 0, 1, n-1, 2, n-2, ... shifted by i.
/// Every ordered adjacent pair appears exactly once. Even n only.
inline std::vector<std::vector<int>> balanced_latin_square(int n) {
    if (n < 2 || n % 2 != 0)
        throw std::invalid_argument("balanced_latin_square: n must be even and >= 2 (odd n needs the mirrored 2n-row variant)");
    std::vector<int> base;
    base.reserve(static_cast<std::size_t>(n));
    for (int j = 0, lo = 1, hi = n - 1; j < n; ++j) {
        if (j == 0)
            base.push_back(0);
        else if (j % 2 == 1)
            base.push_back(lo++);
        else
            base.push_back(hi--);
    }
    std::vector<std::vector<int>> rows(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) rows[static_cast<std::size_t>(i)].push_back((base[static_cast<std::size_t>(j)] + i) % n);
    return rows;
}

/// 53 rings whose 52 consecutive transitions contain each of LL, LS, SL, SS
/// exactly 13 times. Built as a random Eulerian circuit of the two-node
/// multigraph with 13 parallel edges per ordered pair: out-edges of every node
/// are shuffled, except that the non-start node's last exit returns to the
/// start (the BEST-theorem arborescence condition), which guarantees the walk
/// uses every edge and closes on the start ring.
inline std::vector<Ring> generate_ring_sequence(std::uint64_t seed) {
    auto rng = make_stream(seed, {0x72696e67ULL});
    const Ring start = uniform_index(rng, 2) == 0 ? Ring::Large : Ring::Short;
    const Ring other = start == Ring::Large ? Ring::Short : Ring::Large;

    std::vector<Ring> exits_start(2 * kTrialsPerPair);
    for (int i = 0; i < kTrialsPerPair; ++i) {
        exits_start[static_cast<std::size_t>(i)] = Ring::Large;
        exits_start[static_cast<std::size_t>(i + kTrialsPerPair)] = Ring::Short;
    }
    shuffle(std::span<Ring>(exits_start), rng);

    std::vector<Ring> exits_other;
    for (int i = 0; i < kTrialsPerPair; ++i) exits_other.push_back(other);
    for (int i = 0; i < kTrialsPerPair - 1; ++i) exits_other.push_back(start);
    shuffle(std::span<Ring>(exits_other), rng);
    exits_other.push_back(start);

    std::vector<Ring> seq{start};
    std::size_t next_start = 0;
    std::size_t next_other = 0;
    while (seq.size() < static_cast<std::size_t>(kRecordedTrials + 1)) {
        const Ring here = seq.back();
        seq.push_back(here == start ? exits_start.at(next_start++) : exits_other.at(next_other++));
    }
    return seq;
}

struct SessionPlan {
    int participant = 0;
    int square_row = 0;
    std::uint64_t seed = 0;
    std::uint64_t layout_seed = 0;
    std::array<Condition, 4> order{};
    std::array<std::vector<TrialSpec>, 4> trials;  // by position in `order`
};

namespace detail {

inline int pick_window(const SceneLayout& layout, std::optional<Ring> ring, int exclude, Rng& rng) {
    std::vector<int> pool;
    for (int id = 0; id < kWindowCount; ++id)
        if (id != exclude && (!ring || layout.ring(id) == *ring)) pool.push_back(id);
    return pool[static_cast<std::size_t>(uniform_index(rng, pool.size()))];
}

}  // namespace detail

/// Per condition: 5 training + 3 discarded transitions (unconstrained pairs)
/// chained onto the 52 recorded ones that follow the ring sequence. The first
/// training target is always Red-1.
inline SessionPlan build_session(int participant, int square_row, std::uint64_t seed, const SceneLayout& layout,
                                 const SceneConfig& scene) {
    const auto square = balanced_latin_square(4);
    if (square_row < 0 || square_row >= 4) throw std::invalid_argument("build_session: square_row must be in [0, 4)");
    SessionPlan plan;
    plan.participant = participant;
    plan.square_row = square_row;
    plan.seed = seed;
    plan.layout_seed = layout.seed;
    for (std::size_t pos = 0; pos < 4; ++pos) {
        const Condition cond = kConditions[static_cast<std::size_t>(square[static_cast<std::size_t>(square_row)][pos])];
        plan.order[pos] = cond;
        const auto ci = static_cast<std::uint64_t>(condition_index(cond));
        auto rng = make_stream(seed, {1, ci});
        const auto rings = generate_ring_sequence(derive_seed(seed, {2, ci}));

        auto& trials = plan.trials[pos];
        int current = detail::pick_window(layout, std::nullopt, kRedOne, rng);
        for (int idx = 0; idx < kTrialsPerCondition; ++idx) {
            int target = 0;
            if (idx == 0)
                target = kRedOne;
            else if (idx < kLeadingTrials - 1)
                target = detail::pick_window(layout, std::nullopt, current, rng);
            else
                target = detail::pick_window(layout, rings[static_cast<std::size_t>(idx - (kLeadingTrials - 1))], current, rng);
            TrialSpec t;
            t.index = idx;
            t.start_window = current;
            t.target_window = target;
            t.pair = make_pair(layout.ring(current), layout.ring(target));
            t.button_center = place_next_button(layout.window(target), scene, rng);
            t.training = idx < kTrainingTrials;
            t.discarded = !t.training && idx < kLeadingTrials;
            trials.push_back(t);
            current = target;
        }
    }
    return plan;
}

inline std::string trial_flags(const TrialSpec& t) {
    return t.training ? "training" : t.discarded ? "discarded" : "recorded";
}

/// Text manifest of a plan.
inline std::string dump_plan(const SessionPlan& plan) {
    std::ostringstream out;
    out << "participant = " << plan.participant << '\n'
        << "square_row = " << plan.square_row << '\n'
        << "seed = " << plan.seed << '\n'
        << "layout_seed = " << plan.layout_seed << '\n'
        << "order = ";
    for (std::size_t i = 0; i < 4; ++i) out << (i ? "," : "") << to_string(plan.order[i]);
    out << '\n';
    for (std::size_t i = 0; i < 4; ++i) {
        out << "[" << to_string(plan.order[i]) << "]\n";
        out << "index,start,target,pair,button_x,button_y,flags\n";
        for (const auto& t : plan.trials[i])
            out << t.index << ',' << window_name(t.start_window) << ',' << window_name(t.target_window) << ','
                << to_string(t.pair) << ',' << format_double(t.button_center.x) << ','
                << format_double(t.button_center.y) << ',' << trial_flags(t) << '\n';
    }
    return out.str();
}

struct TrialRecord {
    int participant = 0;
    Condition condition;
    int trial = 0;
    DistancePair pair = DistancePair::LL;
    double thumbnail_ms = 0;
    double button_ms = 0;
    double total_ms = 0;
    int errors = 0;
    int detours = 0;
    bool training = false;
    bool discarded = false;

    bool recorded() const { return !training && !discarded; }

    friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

inline constexpr std::string_view kRecordCsvHeader =
    "participant,condition,trial,pair,thumbnail_ms,button_ms,total_ms,errors,detours,training,discarded";

inline std::string to_csv_row(const TrialRecord& r) {
    std::ostringstream out;
    out << r.participant << ',' << to_string(r.condition) << ',' << r.trial << ',' << to_string(r.pair) << ','
        << format_double(r.thumbnail_ms) << ',' << format_double(r.button_ms) << ',' << format_double(r.total_ms)
        << ',' << r.errors << ',' << r.detours << ',' << (r.training ? 1 : 0) << ',' << (r.discarded ? 1 : 0);
    return out.str();
}

inline std::string to_csv(const std::vector<TrialRecord>& records) {
    std::string out(kRecordCsvHeader);
    out += '\n';
    for (const auto& r : records) out += to_csv_row(r) + '\n';
    return out;
}

inline TrialRecord parse_csv_row(std::string_view line) {
    std::vector<std::string_view> f;
    while (true) {
        const auto comma = line.find(',');
        f.push_back(line.substr(0, comma));
        if (comma == std::string_view::npos) break;
        line.remove_prefix(comma + 1);
    }
    if (f.size() != 11) throw ConfigError("expected 11 fields, got " + std::to_string(f.size()));
    const auto flag = [](std::string_view s) {
        if (s == "0") return false;
        if (s == "1") return true;
        throw ConfigError("flag must be 0 or 1");
    };
    TrialRecord r;
    r.participant = static_cast<int>(parse_int(f[0]));
    r.condition = parse_condition(f[1]);
    r.trial = static_cast<int>(parse_int(f[2]));
    r.pair = parse_pair(f[3]);
    r.thumbnail_ms = parse_double(f[4]);
    r.button_ms = parse_double(f[5]);
    r.total_ms = parse_double(f[6]);
    r.errors = static_cast<int>(parse_int(f[7]));
    r.detours = static_cast<int>(parse_int(f[8]));
    r.training = flag(f[9]);
    r.discarded = flag(f[10]);
    if (r.errors < 0 || r.detours < 0) throw ConfigError("negative count");
    if (r.total_ms != r.thumbnail_ms + r.button_ms) throw ConfigError("total_ms != thumbnail_ms + button_ms");
    return r;
}

inline TrialRecord make_record(int participant, Condition cond, const TrialSpec& spec, const InteractionState& done) {
    const auto times = resolve_times(done);
    TrialRecord r;
    r.participant = participant;
    r.condition = cond;
    r.trial = spec.index;
    r.pair = spec.pair;
    r.thumbnail_ms = times.thumbnail_ms;
    r.button_ms = times.button_ms;
    r.total_ms = times.total_ms;
    r.errors = done.errors;
    r.detours = done.category_detours;
    r.training = spec.training;
    r.discarded = spec.discarded;
    return r;
}

/// One logged trial: its spec, the cursor/gaze it started from, and its inputs.
struct LoggedTrial {
    TrialSpec spec;
    PixelPoint start_cursor;
    PixelPoint start_gaze;
    std::vector<InputEvent> events;
    bool complete = false;
    bool aborted = false;
};

struct ConditionLog {
    int participant = 0;
    Condition condition;
    std::uint64_t layout_seed = 0;
    std::vector<LoggedTrial> trials;
};

struct SessionResult {
    SessionPlan plan;
    std::vector<TrialRecord> records;
    std::array<ConditionLog, 4> logs;  // by position in plan.order
};

class SessionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline SessionResult run_session(const SessionPlan& plan, const SpatialBar& bar, const AgentParams& params) {
    if (bar.layout().seed != plan.layout_seed) throw SessionError("run_session: plan was built for another layout");
    SessionResult out;
    out.plan = plan;
    for (std::size_t pos = 0; pos < 4; ++pos) {
        const Condition cond = plan.order[pos];
        const auto ci = static_cast<std::uint64_t>(condition_index(cond));
        const auto& trials = plan.trials[pos];
        auto& log = out.logs[pos];
        log.participant = plan.participant;
        log.condition = cond;
        log.layout_seed = plan.layout_seed;
        if (trials.empty()) continue;
        InteractionState state = bar.initial_state(trials.front().start_window);
        for (const auto& spec : trials) {
            state = bar.begin_trial(state);
            auto rng = make_stream(plan.seed, {3, ci, static_cast<std::uint64_t>(spec.index)});
            LoggedTrial logged{spec, state.cursor, state.gaze, {}, false, false};
            SimulatedTrial sim;
            try {
                sim = simulate_trial(bar, cond, spec, state, params, rng);
            } catch (const std::exception& e) {
                throw SessionError("participant " + std::to_string(plan.participant) + " " + to_string(cond) +
                                   " trial " + std::to_string(spec.index) + ": " + e.what());
            }
            if (sim.final_state.phase != Phase::Complete)
                throw SessionError("participant " + std::to_string(plan.participant) + " " + to_string(cond) +
                                   " trial " + std::to_string(spec.index) + ": trace did not complete the trial");
            logged.events = std::move(sim.trace.events);
            logged.complete = true;
            log.trials.push_back(std::move(logged));
            out.records.push_back(make_record(plan.participant, cond, spec, sim.final_state));
            state = std::move(sim.final_state);
        }
    }
    return out;
}

/// Re-folds logged inputs through the state machine. Aborted trials are skipped.
inline std::vector<TrialRecord> replay(const ConditionLog& log, const SpatialBar& bar) {
    std::vector<TrialRecord> records;
    for (const auto& trial : log.trials) {
        if (trial.aborted) continue;
        InteractionState s = bar.initial_state(trial.spec.start_window);
        s.cursor = trial.start_cursor;
        s.gaze = trial.start_gaze;
        for (const auto& ev : trial.events) s = bar.step(s, ev, log.condition, trial.spec).state;
        if (s.phase != Phase::Complete)
            throw SessionError("replay: trial " + std::to_string(trial.spec.index) + " does not complete");
        records.push_back(make_record(log.participant, log.condition, trial.spec, s));
    }
    return records;
}

struct StudyConfig {
    int participants = 16;
    std::uint64_t seed = 42;
    DisplayConfig display;
    SceneConfig scene;
    InteractionConfig interaction;
    AgentParams agents;
    /// Truncates each condition to its first N trials (0 = full protocol).
    int trials_per_condition = 0;
};

inline std::uint64_t participant_seed(std::uint64_t study_seed, int participant) {
    return derive_seed(study_seed, {static_cast<std::uint64_t>(participant)});
}

inline std::uint64_t layout_seed_for(std::uint64_t session_seed) { return derive_seed(session_seed, {0x4c41594fULL}); }

inline SpatialBar make_bar_for(const StudyConfig& cfg, std::uint64_t layout_seed) {
    CylinderDisplay display(cfg.display);
    return SpatialBar(display, build_layout(display, cfg.scene, layout_seed), cfg.scene, cfg.interaction);
}

inline SessionPlan plan_for(const StudyConfig& cfg, int participant, const SceneLayout& layout) {
    const auto seed = participant_seed(cfg.seed, participant);
    auto plan = build_session(participant, participant % 4, seed, layout, cfg.scene);
    if (cfg.trials_per_condition > 0)
        for (auto& t : plan.trials)
            t.resize(std::min(t.size(), static_cast<std::size_t>(cfg.trials_per_condition)));
    return plan;
}

/// Simulates every participant. Sessions are independent and run concurrently.
inline std::vector<SessionResult> simulate_study(const StudyConfig& cfg) {
    if (cfg.participants <= 0) throw ConfigError("participants must be > 0");
    cfg.agents.validate();
    std::vector<std::future<SessionResult>> jobs;
    for (int p = 0; p < cfg.participants; ++p) {
        jobs.push_back(std::async(std::launch::async, [&cfg, p] {
            const auto bar = make_bar_for(cfg, layout_seed_for(participant_seed(cfg.seed, p)));
            return run_session(plan_for(cfg, p, bar.layout()), bar, cfg.agents);
        }));
    }
    std::vector<SessionResult> out;
    for (auto& j : jobs) out.push_back(j.get());
    return out;
}

inline std::vector<TrialRecord> all_records(const std::vector<SessionResult>& sessions) {
    std::vector<TrialRecord> out;
    for (const auto& s : sessions) out.insert(out.end(), s.records.begin(), s.records.end());
    return out;
}

inline std::vector<TrialRecord> recorded_only(const std::vector<TrialRecord>& records) {
    std::vector<TrialRecord> out;
    std::copy_if(records.begin(), records.end(), std::back_inserter(out), [](const auto& r) { return r.recorded(); });
    return out;
}

}  // namespace vwm
