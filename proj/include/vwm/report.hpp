#pragma once

// Distance-block analysis of trial records and its CSV / text renderings.
//
// Factor A is the selection mode (Gaze = 0, Cursor = 1), factor B the cursor
// behaviour (Teleport = 0, Stay = 1), so the 2x2 cell index equals
// condition_index(). Each participant contributes one mean per condition.

#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vwm/experiment.hpp"
#include "vwm/stats/anova.hpp"

namespace vwm {

enum class Measure { Thumbnail, Button, Total, Errors };
inline constexpr std::array<Measure, 4> kMeasures{Measure::Thumbnail, Measure::Button, Measure::Total,
                                                  Measure::Errors};

enum class Block { Overall, Large, Short, LL, LS, SL, SS };

inline std::string to_string(Measure m) {
    switch (m) {
        case Measure::Thumbnail: return "thumbnail";
        case Measure::Button: return "button";
        case Measure::Total: return "total";
        case Measure::Errors: return "errors";
    }
    return "?";
}

inline Measure parse_measure(std::string_view s) {
    for (auto m : kMeasures)
        if (to_string(m) == s) return m;
    throw ConfigError("unknown measure: " + std::string(s) + " (thumbnail, button, total, errors)");
}

inline std::string to_string(Block b) {
    switch (b) {
        case Block::Overall: return "Overall";
        case Block::Large: return "Large";
        case Block::Short: return "Short";
        case Block::LL: return "LL";
        case Block::LS: return "LS";
        case Block::SL: return "SL";
        case Block::SS: return "SS";
    }
    return "?";
}

inline Block parse_block(std::string_view s) {
    for (auto b : {Block::Overall, Block::Large, Block::Short, Block::LL, Block::LS, Block::SL, Block::SS}) {
        auto name = to_string(b);
        std::string lower = name;
        for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        if (name == s || lower == s) return b;
    }
    throw ConfigError("unknown block: " + std::string(s) + " (overall, large, short, LL, LS, SL, SS)");
}

/// Blocks reported by default: thumbnail time depends on the start ring,
/// button time on the target ring, total time and errors on the pair.
inline std::vector<Block> default_blocks(Measure m) {
    if (m == Measure::Thumbnail || m == Measure::Button) return {Block::Overall, Block::Large, Block::Short};
    return {Block::Overall, Block::LL, Block::LS, Block::SL, Block::SS};
}

struct StatsConfig {
    double alpha = 0.05;
    bool use_art = true;             // fall back to ART when a cell fails the normality screen
    double shapiro_threshold = 0.05;  // 1.0 forces ART

    void validate() const {
        if (!(alpha > 0 && alpha < 1)) throw ConfigError("alpha must be in (0, 1)");
        if (!(shapiro_threshold >= 0 && shapiro_threshold <= 1)) throw ConfigError("shapiro_threshold must be in [0, 1]");
    }
};

inline bool in_block(const TrialRecord& r, Measure m, Block b) {
    switch (b) {
        case Block::Overall: return true;
        case Block::Large:
        case Block::Short: {
            if (m != Measure::Thumbnail && m != Measure::Button)
                throw ConfigError("block " + to_string(b) + " applies to thumbnail or button time only");
            const Ring want = b == Block::Large ? Ring::Large : Ring::Short;
            return (m == Measure::Thumbnail ? start_ring(r.pair) : target_ring(r.pair)) == want;
        }
        case Block::LL: return r.pair == DistancePair::LL;
        case Block::LS: return r.pair == DistancePair::LS;
        case Block::SL: return r.pair == DistancePair::SL;
        case Block::SS: return r.pair == DistancePair::SS;
    }
    return false;
}

inline double measure_value(const TrialRecord& r, Measure m) {
    switch (m) {
        case Measure::Thumbnail: return r.thumbnail_ms;
        case Measure::Button: return r.button_ms;
        case Measure::Total: return r.total_ms;
        case Measure::Errors: return r.errors;
    }
    return 0;
}

/// Participant x condition means of the recorded trials in a block.
inline stats::FactorialDataset block_dataset(const std::vector<TrialRecord>& records, Measure m, Block b) {
    std::map<std::pair<int, int>, std::pair<double, int>> acc;
    for (const auto& r : records) {
        if (!r.recorded() || !in_block(r, m, b)) continue;
        auto& [sum, n] = acc[{r.participant, condition_index(r.condition)}];
        sum += measure_value(r, m);
        ++n;
    }
    stats::FactorialDataset data;
    for (const auto& [key, v] : acc) {
        const int ci = key.second;
        data.push_back({key.first, ci / 2, ci % 2, v.first / v.second});
    }
    return data;
}

struct CellStats {
    int n = 0;
    double mean = 0;
    double sd = 0;
    std::optional<double> shapiro_p;  // empty when the test could not run
};

struct LabelledContrast {
    Condition first;
    Condition second;
    stats::ContrastResult result;
};

struct BlockReport {
    Measure measure = Measure::Thumbnail;
    Block block = Block::Overall;
    bool used_art = false;
    std::array<CellStats, 4> cells;  // by condition_index
    stats::AnovaResult anova;
    std::vector<LabelledContrast> contrasts;
};

inline std::string method_name(const BlockReport& r) { return r.used_art ? "ART" : "ANOVA"; }

inline BlockReport block_analysis(const std::vector<TrialRecord>& records, Measure m, Block b,
                                  const StatsConfig& cfg = {}) {
    cfg.validate();
    const auto data = block_dataset(records, m, b);
    if (data.empty())
        throw stats::StatsError("block " + to_string(b) + " has no recorded trials for " + to_string(m));

    BlockReport rep;
    rep.measure = m;
    rep.block = b;
    std::array<std::vector<double>, 4> groups;
    for (const auto& o : data) groups[static_cast<std::size_t>(stats::cell_index(o.a, o.b))].push_back(o.value);

    bool normal = true;
    for (std::size_t i = 0; i < 4; ++i) {
        auto& c = rep.cells[i];
        const auto& g = groups[i];
        c.n = static_cast<int>(g.size());
        if (g.empty()) continue;
        for (double v : g) c.mean += v;
        c.mean /= static_cast<double>(g.size());
        double ss = 0;
        for (double v : g) ss += (v - c.mean) * (v - c.mean);
        c.sd = g.size() > 1 ? std::sqrt(ss / static_cast<double>(g.size() - 1)) : 0;
        try {
            c.shapiro_p = stats::shapiro_wilk(g).p;
        } catch (const stats::StatsError&) {
        }
        if (!c.shapiro_p || *c.shapiro_p < cfg.shapiro_threshold) normal = false;
    }
    rep.used_art = cfg.use_art && !normal;

    std::array<double, 4> means{}, counts{};
    double ms_error = 0, df_error = 0;
    if (rep.used_art) {
        rep.anova = stats::art_anova(data).table;
        // ART-C for contrasts across the four combined cells: aligning for the
        // combined factor leaves y - grand mean, so the ranks are those of the data.
        const auto ranked = stats::rank_transform(stats::snap_ties(data));
        const auto model = stats::anova_two_way(ranked);
        const auto summary = stats::summarize(ranked);
        means = summary.mean;
        counts = summary.count;
        ms_error = model.ms_error;
        df_error = model.df_error;
    } else {
        rep.anova = stats::anova_two_way(data);
        const auto summary = stats::summarize(data);
        means = summary.mean;
        counts = summary.count;
        ms_error = rep.anova.ms_error;
        df_error = rep.anova.df_error;
    }

    for (auto c : stats::tukey_hsd(means, counts, ms_error, df_error)) {
        const auto& g1 = groups[static_cast<std::size_t>(c.first)];
        const auto& g2 = groups[static_cast<std::size_t>(c.second)];
        c.mean_difference = rep.cells[static_cast<std::size_t>(c.second)].mean - rep.cells[static_cast<std::size_t>(c.first)].mean;
        try {
            c.cohen_d = stats::cohen_d(g1, g2);
        } catch (const stats::StatsError&) {
            c.cohen_d = 0;  // both groups constant
        }
        rep.contrasts.push_back({kConditions[static_cast<std::size_t>(c.first)],
                                 kConditions[static_cast<std::size_t>(c.second)], c});
    }
    return rep;
}

/// Headline percentages used to tune the agent parameters. Advantages are
/// relative to the slower modality; error rates are selection errors per
/// recorded trial in the short-short block.
struct CalibrationMetrics {
    double gaze_large_advantage = 0;   // 1 - gaze / cursor, Large-start thumbnail time
    double cursor_short_advantage = 0;  // 1 - cursor / gaze, Short-start thumbnail time
    double gaze_ss_error_rate = 0;
    double cursor_ss_error_rate = 0;
    double gaze_error_rate = 0;  // all recorded trials
    double cursor_error_rate = 0;
};

inline CalibrationMetrics calibration_metrics(const std::vector<TrialRecord>& records) {
    struct Acc {
        double sum = 0;
        int n = 0;
        void add(double v) {
            sum += v;
            ++n;
        }
        double mean() const {
            if (n == 0) throw stats::StatsError("calibration_metrics: no recorded trials in a group");
            return sum / n;
        }
    };
    std::array<Acc, 2> large, shrt, ss_err, err;  // by selection mode
    for (const auto& r : records) {
        if (!r.recorded()) continue;
        const auto s = static_cast<std::size_t>(r.condition.selection == Selection::Gaze ? 0 : 1);
        (start_ring(r.pair) == Ring::Large ? large : shrt)[s].add(r.thumbnail_ms);
        if (r.pair == DistancePair::SS) ss_err[s].add(r.errors);
        err[s].add(r.errors);
    }
    CalibrationMetrics m;
    m.gaze_large_advantage = 1 - large[0].mean() / large[1].mean();
    m.cursor_short_advantage = 1 - shrt[1].mean() / shrt[0].mean();
    m.gaze_ss_error_rate = ss_err[0].mean();
    m.cursor_ss_error_rate = ss_err[1].mean();
    m.gaze_error_rate = err[0].mean();
    m.cursor_error_rate = err[1].mean();
    return m;
}

inline std::string format_calibration(const CalibrationMetrics& m) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "gaze advantage, large-start thumbnail time:   %6.2f %%\n"
                  "cursor advantage, short-start thumbnail time: %6.2f %%\n"
                  "selection errors per trial, SS block:  gaze %5.2f %%  cursor %5.2f %%\n"
                  "selection errors per trial, all:       gaze %5.2f %%  cursor %5.2f %%\n",
                  100 * m.gaze_large_advantage, 100 * m.cursor_short_advantage, 100 * m.gaze_ss_error_rate,
                  100 * m.cursor_ss_error_rate, 100 * m.gaze_error_rate, 100 * m.cursor_error_rate);
    return buf;
}

// ---- rendering -------------------------------------------------------------

inline constexpr std::array<const char*, 3> kEffectNames{"Selection Mode", "Cursor Behavior", "Interaction Effect"};

inline std::string effect_size_label(double eta) {
    if (eta < 0.01) return "vs";
    if (eta < 0.06) return "s";
    if (eta < 0.14) return "m";
    return "l";
}

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string format_p(double p) { return p < 0.001 ? "<0.001" : fixed(p, 3); }

inline std::string condition_label(Condition c) {
    return std::string(c.selection == Selection::Gaze ? "Gaze" : "Cursor") + " " +
           (c.behavior == Behavior::Teleport ? "Teleport" : "Stay");
}

inline constexpr std::string_view kEffectsCsvHeader = "measure,block,method,effect,F,df_effect,df_error,p,partial_eta_sq";
inline constexpr std::string_view kCellsCsvHeader = "measure,block,condition,n,mean,sd,shapiro_p";
inline constexpr std::string_view kContrastsCsvHeader =
    "measure,block,method,first,second,mean_difference,q,p,cohen_d";

inline std::string effects_csv(const std::vector<BlockReport>& reports) {
    std::string out(kEffectsCsvHeader);
    out += '\n';
    for (const auto& r : reports)
        for (std::size_t e = 0; e < 3; ++e) {
            const auto& row = r.anova.effects[e];
            out += to_string(r.measure) + ',' + to_string(r.block) + ',' + method_name(r) + ',' + kEffectNames[e] +
                   ',' + format_double(row.f) + ',' + format_double(row.df) + ',' + format_double(r.anova.df_error) +
                   ',' + format_double(row.p) + ',' + format_double(row.partial_eta_sq) + '\n';
        }
    return out;
}

inline std::string cells_csv(const std::vector<BlockReport>& reports) {
    std::string out(kCellsCsvHeader);
    out += '\n';
    for (const auto& r : reports)
        for (std::size_t i = 0; i < 4; ++i) {
            const auto& c = r.cells[i];
            out += to_string(r.measure) + ',' + to_string(r.block) + ',' + to_string(kConditions[i]) + ',' +
                   std::to_string(c.n) + ',' + format_double(c.mean) + ',' + format_double(c.sd) + ',' +
                   (c.shapiro_p ? format_double(*c.shapiro_p) : "") + '\n';
        }
    return out;
}

inline std::string contrasts_csv(const std::vector<BlockReport>& reports) {
    std::string out(kContrastsCsvHeader);
    out += '\n';
    for (const auto& r : reports)
        for (const auto& c : r.contrasts)
            out += to_string(r.measure) + ',' + to_string(r.block) + ',' + method_name(r) + ',' +
                   to_string(c.first) + ',' + to_string(c.second) + ',' + format_double(c.result.mean_difference) +
                   ',' + format_double(c.result.q) + ',' + format_double(c.result.p) + ',' +
                   format_double(c.result.cohen_d) + '\n';
    return out;
}

inline std::string measure_title(Measure m) {
    switch (m) {
        case Measure::Thumbnail: return "Thumbnail time (ms)";
        case Measure::Button: return "Button time (ms)";
        case Measure::Total: return "Total time (ms)";
        case Measure::Errors: return "Selection errors (per trial)";
    }
    return "?";
}

/// Table with one row per block and F / p / partial eta squared per effect.
/// Effects with p > alpha print as ---.
inline std::string text_report(const std::vector<BlockReport>& reports, const StatsConfig& cfg = {}) {
    if (reports.empty()) return {};
    std::ostringstream out;
    char line[256];
    out << measure_title(reports.front().measure) << "\n\n";
    std::snprintf(line, sizeof line, "%-9s %-8s | %-27s | %-27s | %-27s\n", "Block", "Method", kEffectNames[0],
                  kEffectNames[1], kEffectNames[2]);
    out << line;
    std::snprintf(line, sizeof line, "%-9s %-8s |", "", "");
    out << line;
    for (int e = 0; e < 3; ++e) {
        std::snprintf(line, sizeof line, " %-8s %-7s %-10s|", "F", "p", "eta_p2");
        out << line;
    }
    out << '\n' << std::string(105, '-') << '\n';
    for (const auto& r : reports) {
        std::snprintf(line, sizeof line, "%-9s %-8s |", to_string(r.block).c_str(), method_name(r).c_str());
        out << line;
        for (const auto& row : r.anova.effects) {
            if (row.p > cfg.alpha) {
                std::snprintf(line, sizeof line, " %-8s %-7s %-10s|", "---", "---", "---");
            } else {
                const auto eta = fixed(row.partial_eta_sq, 3) + "(" + effect_size_label(row.partial_eta_sq) + ")";
                std::snprintf(line, sizeof line, " %-8s %-7s %-10s|", fixed(row.f, 2).c_str(), format_p(row.p).c_str(),
                              eta.c_str());
            }
            out << line;
        }
        out << '\n';
    }
    for (const auto& r : reports) {
        out << "\n[" << to_string(r.block) << "] df = 1, " << format_double(r.anova.df_error) << "\n";
        for (std::size_t i = 0; i < 4; ++i) {
            const auto& c = r.cells[i];
            std::snprintf(line, sizeof line, "  %-16s n=%-3d mean=%-10s sd=%-10s shapiro p=%s\n",
                          condition_label(kConditions[i]).c_str(), c.n, fixed(c.mean, 3).c_str(),
                          fixed(c.sd, 3).c_str(), c.shapiro_p ? format_p(*c.shapiro_p).c_str() : "n/a");
            out << line;
        }
        bool any = false;
        for (const auto& c : r.contrasts) {
            if (c.result.p > cfg.alpha) continue;
            if (!any) out << "  Tukey HSD" << (r.used_art ? " (ART-C ranks)" : "") << ":\n";
            any = true;
            // Name the lower-mean condition first: "X < Y".
            const bool second_lower = c.result.mean_difference < 0;
            const auto& lo = second_lower ? c.second : c.first;
            const auto& hi = second_lower ? c.first : c.second;
            std::snprintf(line, sizeof line, "    %-16s < %-16s p=%-7s d=%s\n", condition_label(lo).c_str(),
                          condition_label(hi).c_str(), format_p(c.result.p).c_str(),
                          fixed(std::abs(c.result.cohen_d), 2).c_str());
            out << line;
        }
        if (!any) out << "  Tukey HSD: no significant pairs\n";
    }
    return out.str();
}

}  // namespace vwm
