#pragma once

// Synthetic users. The cursor agent moves with a Shannon-form Fitts' law
// (optionally clutching when the trackpad runs out), the gaze agent jumps with
// main-sequence saccades and confirms with a click. Both drive the interaction
// state machine in lockstep, so every generated trace is known to complete.

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "vwm/interaction.hpp"
#include "vwm/kv.hpp"
#include "vwm/random.hpp"

namespace vwm {

struct CursorAgentParams {
    double fitts_a = 0.2;                       // s
    double fitts_b = 0.15;                      // s/bit
    double reaction_s = 0.3;                    // perceive the next task before moving
    double click_s = 0.12;
    double trackpad_extent_device_units = 0.0;  // 0 disables clutching
    double clutch_penalty_s = 0.0;
    double jitter_px = 20;                      // endpoint s.d. cap per axis
    double sample_interval_s = 0.05;            // spacing of CursorDelta samples
};

struct GazeAgentParams {
    double saccade_latency_s = 0.2;
    double saccade_ms_per_deg = 2.2;
    double saccade_base_ms = 21;
    double corrective_threshold_deg = 30;
    double tracking_noise_deg = 0.9;  // per-axis s.d. of the reported gaze
    double modality_switch_s = 0.25;
    double cursor_relocate_s = 0.6;   // Stay only: find the cursor again
    double verify_s = 0.1;            // confirm the highlight before clicking
};

struct AgentParams {
    CursorAgentParams cursor;
    GazeAgentParams gaze;

    static constexpr std::array<const char*, 16> keys{
        "fitts_a",           "fitts_b",           "reaction_s",         "click_s",
        "trackpad_extent_device_units",           "clutch_penalty_s",   "jitter_px",
        "sample_interval_s", "saccade_latency_s", "saccade_ms_per_deg", "saccade_base_ms",
        "corrective_threshold_deg",               "tracking_noise_deg", "modality_switch_s",
        "cursor_relocate_s", "verify_s"};

    static AgentParams from_kv(const KeyValues& kv) {
        AgentParams p;
        kv.read("fitts_a", p.cursor.fitts_a);
        kv.read("fitts_b", p.cursor.fitts_b);
        kv.read("reaction_s", p.cursor.reaction_s);
        kv.read("click_s", p.cursor.click_s);
        kv.read("trackpad_extent_device_units", p.cursor.trackpad_extent_device_units);
        kv.read("clutch_penalty_s", p.cursor.clutch_penalty_s);
        kv.read("jitter_px", p.cursor.jitter_px);
        kv.read("sample_interval_s", p.cursor.sample_interval_s);
        kv.read("saccade_latency_s", p.gaze.saccade_latency_s);
        kv.read("saccade_ms_per_deg", p.gaze.saccade_ms_per_deg);
        kv.read("saccade_base_ms", p.gaze.saccade_base_ms);
        kv.read("corrective_threshold_deg", p.gaze.corrective_threshold_deg);
        kv.read("tracking_noise_deg", p.gaze.tracking_noise_deg);
        kv.read("modality_switch_s", p.gaze.modality_switch_s);
        kv.read("cursor_relocate_s", p.gaze.cursor_relocate_s);
        kv.read("verify_s", p.gaze.verify_s);
        p.validate();
        return p;
    }

    void to_kv(KeyValues& kv) const {
        kv.set("fitts_a", cursor.fitts_a);
        kv.set("fitts_b", cursor.fitts_b);
        kv.set("reaction_s", cursor.reaction_s);
        kv.set("click_s", cursor.click_s);
        kv.set("trackpad_extent_device_units", cursor.trackpad_extent_device_units);
        kv.set("clutch_penalty_s", cursor.clutch_penalty_s);
        kv.set("jitter_px", cursor.jitter_px);
        kv.set("sample_interval_s", cursor.sample_interval_s);
        kv.set("saccade_latency_s", gaze.saccade_latency_s);
        kv.set("saccade_ms_per_deg", gaze.saccade_ms_per_deg);
        kv.set("saccade_base_ms", gaze.saccade_base_ms);
        kv.set("corrective_threshold_deg", gaze.corrective_threshold_deg);
        kv.set("tracking_noise_deg", gaze.tracking_noise_deg);
        kv.set("modality_switch_s", gaze.modality_switch_s);
        kv.set("cursor_relocate_s", gaze.cursor_relocate_s);
        kv.set("verify_s", gaze.verify_s);
    }

    void validate() const {
        const auto non_negative = [](double v, const char* name) {
            if (!(v >= 0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be finite and >= 0");
        };
        if (!(cursor.fitts_b > 0)) throw ConfigError("fitts_b must be > 0");
        non_negative(cursor.fitts_a, "fitts_a");
        non_negative(cursor.reaction_s, "reaction_s");
        non_negative(cursor.click_s, "click_s");
        non_negative(cursor.trackpad_extent_device_units, "trackpad_extent_device_units");
        non_negative(cursor.clutch_penalty_s, "clutch_penalty_s");
        non_negative(cursor.jitter_px, "jitter_px");
        if (!(cursor.sample_interval_s > 0)) throw ConfigError("sample_interval_s must be > 0");
        non_negative(gaze.saccade_latency_s, "saccade_latency_s");
        non_negative(gaze.saccade_ms_per_deg, "saccade_ms_per_deg");
        non_negative(gaze.saccade_base_ms, "saccade_base_ms");
        non_negative(gaze.corrective_threshold_deg, "corrective_threshold_deg");
        non_negative(gaze.tracking_noise_deg, "tracking_noise_deg");
        non_negative(gaze.modality_switch_s, "modality_switch_s");
        non_negative(gaze.cursor_relocate_s, "cursor_relocate_s");
        non_negative(gaze.verify_s, "verify_s");
    }
};

/// Movement time in seconds: a + b*log2(D/W + 1), plus one clutch penalty per
/// extra trackpad stroke when D/sensitivity exceeds the trackpad extent.
inline double fitts_time(const CursorAgentParams& p, double distance_px, double width_px, double sensitivity = 20) {
    if (!(width_px > 0)) throw std::invalid_argument("fitts_time: width must be > 0");
    if (!(distance_px >= 0)) throw std::invalid_argument("fitts_time: distance must be >= 0");
    double t = p.fitts_a + p.fitts_b * std::log2(distance_px / width_px + 1);
    const double motor = distance_px / sensitivity;
    if (p.trackpad_extent_device_units > 0 && motor > p.trackpad_extent_device_units)
        t += p.clutch_penalty_s * std::ceil(motor / p.trackpad_extent_device_units - 1);
    return t;
}

/// Latency plus a linear main-sequence duration. Beyond the corrective
/// threshold a second saccade covers the remainder.
inline double saccade_time(const GazeAgentParams& p, double amplitude_deg) {
    if (!(amplitude_deg >= 0)) throw std::invalid_argument("saccade_time: amplitude must be >= 0");
    double ms = p.saccade_base_ms + p.saccade_ms_per_deg * amplitude_deg;
    if (amplitude_deg > p.corrective_threshold_deg)
        ms += p.saccade_base_ms + p.saccade_ms_per_deg * (amplitude_deg - p.corrective_threshold_deg);
    return p.saccade_latency_s + ms / 1000;
}

/// Visual angle subtended at the viewer by an on-surface pixel distance.
inline double visual_angle_deg(const CylinderDisplay& d, double px) {
    return px / d.px_per_m() / d.radius_m() * 180 / std::numbers::pi;
}

struct ClickAnnotation {
    std::size_t event_index = 0;
    Target intended;
};

struct EventTrace {
    std::vector<InputEvent> events;
    std::vector<ClickAnnotation> clicks;
};

struct SimulatedTrial {
    EventTrace trace;
    InteractionState final_state;
    std::vector<Emission> emissions;
};

class AgentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

// Point of `r` closest to `p` that hit testing still counts as inside.
inline PixelPoint inside_point(const Rect& r, PixelPoint p) {
    if (r.contains(p)) return p;
    return {std::clamp(p.x, r.x0, std::nextafter(r.x1, r.x0)), std::clamp(p.y, r.y0, std::nextafter(r.y1, r.y0))};
}

inline double rect_distance(const Rect& r, PixelPoint p) {
    const double dx = std::max({r.x0 - p.x, 0.0, p.x - r.x1});
    const double dy = std::max({r.y0 - p.y, 0.0, p.y - r.y1});
    return std::hypot(dx, dy);
}

class TraceDriver {
public:
    TraceDriver(const SpatialBar& bar, Condition cond, const TrialSpec& trial, InteractionState start)
        : bar_(bar), cond_(cond), trial_(trial), state_(std::move(start)) {}

    const InteractionState& state() const { return state_; }

    void emit(InputEvent ev, const Target* intended = nullptr) {
        // Keep times strictly increasing even for degenerate zero-duration parameters.
        if (!out_.trace.events.empty() && ev.t_ms <= last_t_)
            ev.t_ms = std::nextafter(last_t_, std::numeric_limits<double>::infinity());
        last_t_ = ev.t_ms;
        if (intended) out_.trace.clicks.push_back({out_.trace.events.size(), *intended});
        out_.trace.events.push_back(ev);
        auto r = bar_.step(state_, ev, cond_, trial_);
        state_ = std::move(r.state);
        out_.emissions.insert(out_.emissions.end(), r.emissions.begin(), r.emissions.end());
    }

    SimulatedTrial finish() && {
        out_.final_state = std::move(state_);
        return std::move(out_);
    }

private:
    const SpatialBar& bar_;
    Condition cond_;
    const TrialSpec& trial_;
    InteractionState state_;
    SimulatedTrial out_;
    double last_t_ = 0;
};

}  // namespace detail

/// Generates one trial's input trace starting from `start` (the state carried
/// over from the previous trial, already reset with begin_trial).
inline SimulatedTrial simulate_trial(const SpatialBar& bar, Condition cond, const TrialSpec& trial,
                                     const InteractionState& start, const AgentParams& params, Rng& rng) {
    const auto& cp = params.cursor;
    const auto& gp = params.gaze;
    const auto& display = bar.display();
    const double sensitivity = bar.config().sensitivity;
    detail::TraceDriver drv(bar, cond, trial, start);
    double t = 0;  // seconds since trial start
    constexpr int kMaxAttempts = 200;

    // Straight-line cursor movement to `goal`, sampled as device deltas.
    const auto move_cursor = [&](PixelPoint goal, double fitts_width) {
        const PixelPoint from = drv.state().cursor;
        const double dist = distance_px(from, goal);
        const double duration = fitts_time(cp, dist, fitts_width, sensitivity);
        if (dist == 0) {
            t += duration;
            return;
        }
        const int samples = std::max(1, static_cast<int>(std::ceil(duration / cp.sample_interval_s)));
        PixelPoint prev = from;
        for (int k = 1; k <= samples; ++k) {
            const double f = static_cast<double>(k) / samples;
            const PixelPoint p{from.x + (goal.x - from.x) * f, from.y + (goal.y - from.y) * f};
            drv.emit(InputEvent::cursor_delta((t + duration * f) * 1000, (p.x - prev.x) / sensitivity,
                                              (p.y - prev.y) / sensitivity));
            prev = p;
        }
        t += duration;
    };

    const auto aim = [&](const Rect& r) {
        const PixelPoint c = r.center();
        const double sx = std::min(cp.jitter_px, r.width() / 4.133);
        const double sy = std::min(cp.jitter_px, r.height() / 4.133);
        const double nx = standard_normal(rng);
        const double ny = standard_normal(rng);
        return PixelPoint{c.x + sx * nx, c.y + sy * ny};
    };

    const double noise_px = gp.tracking_noise_deg * std::numbers::pi / 180 * display.radius_m() * display.px_per_m();
    PixelPoint eyes = start.cursor;

    t += cp.reaction_s;
    if (cond.selection == Selection::Gaze) t += gp.modality_switch_s;

    for (int attempt = 0; drv.state().phase == Phase::SelectCategory || drv.state().phase == Phase::SelectThumbnail;
         ++attempt) {
        if (attempt >= kMaxAttempts) throw AgentError("simulate_trial: bar selection did not converge");
        const auto& s = drv.state();
        const Color want = color_of(trial.target_window);
        Target intended;
        if (s.phase == Phase::SelectCategory)
            intended = Target::category(want);
        else if (s.open_color != want)
            intended = Target::go_back();
        else
            intended = Target::thumbnail(want, number_of(trial.target_window));
        const auto& model = bar.bar(s.open_color);
        const BarTile* tile = model.find(intended);
        if (!tile) throw AgentError("simulate_trial: intended tile missing from bar");

        if (cond.selection == Selection::Gaze) {
            const PixelPoint c = tile->rect.center();
            const PixelPoint noisy{c.x + noise_px * standard_normal(rng), c.y + noise_px * standard_normal(rng)};
            const BarTile* captured = &model.tiles.front();
            double best = std::numeric_limits<double>::infinity();
            for (const auto& candidate : model.tiles) {
                const double d = detail::rect_distance(candidate.rect, noisy);
                if (d < best) {
                    best = d;
                    captured = &candidate;
                }
            }
            const PixelPoint g = detail::inside_point(captured->rect, noisy);
            t += saccade_time(gp, visual_angle_deg(display, distance_px(eyes, g)));
            eyes = g;
            drv.emit(InputEvent::gaze_point(t * 1000, g));
            t += gp.verify_s + cp.click_s;
            drv.emit(InputEvent::click(t * 1000), &intended);
        } else {
            move_cursor(aim(tile->rect), std::min(tile->rect.width(), tile->rect.height()));
            t += cp.click_s;
            drv.emit(InputEvent::click(t * 1000), &intended);
        }
    }

    if (drv.state().phase != Phase::PressButton) throw AgentError("simulate_trial: unexpected phase after bar selection");

    t += cp.reaction_s;
    if (cond.selection == Selection::Gaze) {
        t += gp.modality_switch_s;
        if (cond.behavior == Behavior::Stay) t += gp.cursor_relocate_s;
    }
    const Rect button = button_rect(trial.button_center, bar.scene());
    const Target press = Target::next_button(trial.target_window);
    for (int attempt = 0; drv.state().phase == Phase::PressButton; ++attempt) {
        if (attempt >= kMaxAttempts) throw AgentError("simulate_trial: button press did not converge");
        move_cursor(aim(button), std::min(button.width(), button.height()));
        t += cp.click_s;
        drv.emit(InputEvent::click(t * 1000), &press);
    }
    return std::move(drv).finish();
}

}  // namespace vwm
