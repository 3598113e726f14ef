#pragma once

// Line-delimited event logs, one file per participant x condition:
//
//   # vwm-log/1
//   participant,<id>
//   condition,<gaze-teleport|gaze-stay|cursor-teleport|cursor-stay>
//   layout_seed,<u64>
//   trial,<index>,<start>,<target>,<pair>,<button_x>,<button_y>,<flags>,<cursor_x>,<cursor_y>,<gaze_x>,<gaze_y>
//   <t_ms>,move,<dx>,<dy>
//   <t_ms>,gaze,<x>,<y>
//   <t_ms>,click
//   end,<index>          (or aborted,<index>)
//
// Numbers use the shortest round-trip decimal form, so replay is exact.

#include <string>
#include <string_view>
#include <vector>

#include "vwm/experiment.hpp"

namespace vwm {

inline constexpr std::string_view kLogMagic = "# vwm-log/1";

inline std::string format_event(const InputEvent& ev) {
    std::string out = format_double(ev.t_ms);
    switch (ev.kind) {
        case InputKind::CursorDelta:
            out += ",move," + format_double(ev.x) + "," + format_double(ev.y);
            break;
        case InputKind::GazePoint:
            out += ",gaze," + format_double(ev.x) + "," + format_double(ev.y);
            break;
        case InputKind::Click:
            out += ",click";
            break;
    }
    return out;
}

inline std::string format_trial_header(const LoggedTrial& t) {
    const auto& s = t.spec;
    return "trial," + std::to_string(s.index) + "," + window_name(s.start_window) + "," +
           window_name(s.target_window) + "," + to_string(s.pair) + "," + format_double(s.button_center.x) + "," +
           format_double(s.button_center.y) + "," + trial_flags(s) + "," + format_double(t.start_cursor.x) + "," +
           format_double(t.start_cursor.y) + "," + format_double(t.start_gaze.x) + "," +
           format_double(t.start_gaze.y);
}

inline std::string format_log_preamble(const ConditionLog& log) {
    std::string out(kLogMagic);
    out += "\nparticipant," + std::to_string(log.participant) + "\ncondition," + to_string(log.condition) +
           "\nlayout_seed," + std::to_string(log.layout_seed) + "\n";
    return out;
}

inline std::string format_log(const ConditionLog& log) {
    std::string out = format_log_preamble(log);
    for (const auto& t : log.trials) {
        out += format_trial_header(t) + "\n";
        for (const auto& ev : t.events) out += format_event(ev) + "\n";
        if (t.aborted)
            out += "aborted," + std::to_string(t.spec.index) + "\n";
        else if (t.complete)
            out += "end," + std::to_string(t.spec.index) + "\n";
    }
    return out;
}

struct LogIssue {
    std::size_t line = 0;
    std::string message;
};

struct ParsedLog {
    ConditionLog log;
    std::vector<LogIssue> issues;
};

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> f;
    while (true) {
        const auto comma = line.find(',');
        f.push_back(line.substr(0, comma));
        if (comma == std::string_view::npos) break;
        line.remove_prefix(comma + 1);
    }
    return f;
}

inline int parse_window_name(std::string_view s) {
    const auto dash = s.find('-');
    if (dash == std::string_view::npos) throw ConfigError("bad window name: " + std::string(s));
    const Color c = parse_color(s.substr(0, dash));
    const auto n = parse_int(s.substr(dash + 1));
    if (n < 1 || n > kNumbersPerColor) throw ConfigError("bad window number: " + std::string(s));
    return window_id(c, static_cast<int>(n));
}

}  // namespace detail

/// Parses a log. Every malformed line is reported with its 1-based line
/// number; the trial it belongs to is dropped, the rest is kept.
inline ParsedLog parse_log(std::string_view text) {
    ParsedLog out;
    auto& log = out.log;
    std::size_t line_no = 0;
    bool have_participant = false, have_condition = false, have_seed = false;
    bool in_trial = false;
    bool trial_bad = false;
    LoggedTrial current;
    double last_t = 0;

    const auto close_trial = [&](bool keep) {
        if (in_trial && keep && !trial_bad) log.trials.push_back(std::move(current));
        current = LoggedTrial{};
        in_trial = false;
        trial_bad = false;
    };
    const auto issue = [&](std::string msg) {
        out.issues.push_back({line_no, std::move(msg)});
        trial_bad = true;
    };

    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line == kLogMagic) continue;
            issue("missing '# vwm-log/1' header");
        }
        if (line.front() == '#') continue;
        const auto f = detail::split_commas(line);
        try {
            if (f[0] == "participant" && f.size() == 2) {
                log.participant = static_cast<int>(parse_int(f[1]));
                have_participant = true;
            } else if (f[0] == "condition" && f.size() == 2) {
                log.condition = parse_condition(f[1]);
                have_condition = true;
            } else if (f[0] == "layout_seed" && f.size() == 2) {
                log.layout_seed = static_cast<std::uint64_t>(std::stoull(std::string(f[1])));
                have_seed = true;
            } else if (f[0] == "trial") {
                if (in_trial) {
                    out.issues.push_back({line_no, "trial started before previous trial ended"});
                    close_trial(false);
                }
                in_trial = true;
                last_t = 0;
                if (f.size() != 12) throw ConfigError("trial line needs 12 fields");
                auto& s = current.spec;
                s.index = static_cast<int>(parse_int(f[1]));
                s.start_window = detail::parse_window_name(f[2]);
                s.target_window = detail::parse_window_name(f[3]);
                s.pair = parse_pair(f[4]);
                s.button_center = {parse_double(f[5]), parse_double(f[6])};
                if (f[7] == "training")
                    s.training = true;
                else if (f[7] == "discarded")
                    s.discarded = true;
                else if (f[7] != "recorded")
                    throw ConfigError("unknown trial flag");
                current.start_cursor = {parse_double(f[8]), parse_double(f[9])};
                current.start_gaze = {parse_double(f[10]), parse_double(f[11])};
                if (s.start_window == s.target_window) throw ConfigError("start and target window coincide");
            } else if (f[0] == "end" || f[0] == "aborted") {
                if (!in_trial) throw ConfigError("'" + std::string(f[0]) + "' outside a trial");
                if (f.size() != 2 || parse_int(f[1]) != current.spec.index)
                    throw ConfigError("trial index mismatch");
                current.complete = f[0] == "end";
                current.aborted = f[0] == "aborted";
                close_trial(true);
            } else {
                if (!in_trial) throw ConfigError("event outside a trial");
                if (f.size() < 2) throw ConfigError("event line needs a kind");
                const double t = parse_double(f[0]);
                if (!std::isfinite(t) || t < last_t) throw ConfigError("event time not non-decreasing");
                last_t = t;
                if (f[1] == "move" && f.size() == 4)
                    current.events.push_back(InputEvent::cursor_delta(t, parse_double(f[2]), parse_double(f[3])));
                else if (f[1] == "gaze" && f.size() == 4)
                    current.events.push_back(InputEvent::gaze_point(t, {parse_double(f[2]), parse_double(f[3])}));
                else if (f[1] == "click" && f.size() == 2)
                    current.events.push_back(InputEvent::click(t));
                else
                    throw ConfigError("unknown event '" + std::string(f[1]) + "'");
            }
        } catch (const std::exception& e) {
            issue(e.what());
            if (!in_trial) trial_bad = false;
        }
    }
    if (in_trial) {
        // A trial cut off mid-way (no end/aborted line) is treated as aborted.
        current.aborted = true;
        close_trial(true);
    }
    if (!have_participant) out.issues.push_back({0, "missing participant line"});
    if (!have_condition) out.issues.push_back({0, "missing condition line"});
    if (!have_seed) out.issues.push_back({0, "missing layout_seed line"});
    return out;
}

}  // namespace vwm
