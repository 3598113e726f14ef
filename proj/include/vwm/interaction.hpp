#pragma once

// The bar's interaction state machine. One trial is a fold of input events
// over InteractionState; cursor position, gaze and window stacking carry over
// from one trial to the next, everything else resets at trial start.
//
//   SelectCategory --category--> SelectThumbnail --correct thumbnail--> PressButton --Next--> Complete
//         ^                          |    ^  |
//         +--------Go Back-----------+    +--+ wrong thumbnail (error, window raised)

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vwm/geometry.hpp"
#include "vwm/scene.hpp"

namespace vwm {

enum class Selection { Gaze, Cursor };
enum class Behavior { Teleport, Stay };

struct Condition {
    Selection selection = Selection::Gaze;
    Behavior behavior = Behavior::Teleport;

    friend bool operator==(const Condition&, const Condition&) = default;
};

/// Canonical order: Gaze-Teleport, Gaze-Stay, Cursor-Teleport, Cursor-Stay.
inline constexpr std::array<Condition, 4> kConditions{
    Condition{Selection::Gaze, Behavior::Teleport}, Condition{Selection::Gaze, Behavior::Stay},
    Condition{Selection::Cursor, Behavior::Teleport}, Condition{Selection::Cursor, Behavior::Stay}};

inline int condition_index(Condition c) {
    return (c.selection == Selection::Cursor ? 2 : 0) + (c.behavior == Behavior::Stay ? 1 : 0);
}

inline std::string to_string(Condition c) {
    return std::string(c.selection == Selection::Gaze ? "gaze" : "cursor") + "-" +
           (c.behavior == Behavior::Teleport ? "teleport" : "stay");
}

inline Condition parse_condition(std::string_view s) {
    for (auto c : kConditions)
        if (to_string(c) == s) return c;
    throw ConfigError("unknown condition: " + std::string(s));
}

/// Ring of the start window, then ring of the target window.
enum class DistancePair { LL, LS, SL, SS };
inline constexpr std::array<DistancePair, 4> kPairs{DistancePair::LL, DistancePair::LS, DistancePair::SL,
                                                    DistancePair::SS};

inline DistancePair make_pair(Ring from, Ring to) {
    if (from == Ring::Large) return to == Ring::Large ? DistancePair::LL : DistancePair::LS;
    return to == Ring::Large ? DistancePair::SL : DistancePair::SS;
}
inline Ring start_ring(DistancePair p) { return p == DistancePair::LL || p == DistancePair::LS ? Ring::Large : Ring::Short; }
inline Ring target_ring(DistancePair p) { return p == DistancePair::LL || p == DistancePair::SL ? Ring::Large : Ring::Short; }

inline std::string to_string(DistancePair p) {
    return {ring_letter(start_ring(p)), ring_letter(target_ring(p))};
}

inline DistancePair parse_pair(std::string_view s) {
    for (auto p : kPairs)
        if (to_string(p) == s) return p;
    throw ConfigError("unknown distance pair: " + std::string(s));
}

struct TrialSpec {
    int index = 0;
    int start_window = 0;
    int target_window = 0;
    DistancePair pair = DistancePair::LL;
    PixelPoint button_center;
    bool training = false;
    bool discarded = false;

    bool recorded() const { return !training && !discarded; }
};

enum class InputKind { CursorDelta, GazePoint, Click };

struct InputEvent {
    double t_ms = 0;
    InputKind kind = InputKind::Click;
    double x = 0;  // dx in device units, or gaze x in pixels
    double y = 0;

    static InputEvent cursor_delta(double t, double dx, double dy) { return {t, InputKind::CursorDelta, dx, dy}; }
    static InputEvent gaze_point(double t, PixelPoint p) { return {t, InputKind::GazePoint, p.x, p.y}; }
    static InputEvent click(double t) { return {t, InputKind::Click, 0, 0}; }

    friend bool operator==(const InputEvent&, const InputEvent&) = default;
};

struct InteractionConfig {
    double sensitivity = 20;
    double animation_ms = 300;
};

enum class Phase { SelectCategory, SelectThumbnail, PressButton, Complete };

inline std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::SelectCategory: return "select_category";
        case Phase::SelectThumbnail: return "select_thumbnail";
        case Phase::PressButton: return "press_button";
        case Phase::Complete: return "complete";
    }
    return "?";
}

/// Thumbnail clone flying from the bar tile to the restored window.
struct Animation {
    Rect from;
    Rect to;
    double t_start = 0;
    double t_end = 0;
};

struct InteractionState {
    Phase phase = Phase::SelectCategory;
    std::optional<Color> open_color;
    PixelPoint cursor;
    PixelPoint gaze;
    Target highlight;
    std::optional<Animation> animation;
    std::optional<NextButton> next_button;
    std::vector<int> z_order;
    int errors = 0;
    int category_detours = 0;
    int stray_clicks = 0;
    int teleports = 0;
    std::optional<double> t_thumbnail;
    std::optional<double> t_button;
    double last_t = 0;
    bool started = false;  // at least one event seen this trial

    double animation_remaining_ms(double now) const {
        if (!animation) return 0;
        return std::max(0.0, animation->t_end - now);
    }
};

enum class EmissionKind {
    CategoryOpened,
    GoBack,
    WrongThumbnail,
    ThumbnailConfirmed,
    Teleport,
    StrayClick,
    TrialComplete
};

inline std::string_view to_string(EmissionKind k) {
    switch (k) {
        case EmissionKind::CategoryOpened: return "category_opened";
        case EmissionKind::GoBack: return "go_back";
        case EmissionKind::WrongThumbnail: return "wrong_thumbnail";
        case EmissionKind::ThumbnailConfirmed: return "thumbnail_confirmed";
        case EmissionKind::Teleport: return "teleport";
        case EmissionKind::StrayClick: return "stray_click";
        case EmissionKind::TrialComplete: return "trial_complete";
    }
    return "?";
}

struct Emission {
    double t_ms = 0;
    EmissionKind kind = EmissionKind::StrayClick;
    Target target;

    friend bool operator==(const Emission&, const Emission&) = default;
};

struct StepResult {
    InteractionState state;
    std::vector<Emission> emissions;
};

struct TrialTimes {
    double thumbnail_ms = 0;
    double button_ms = 0;
    double total_ms = 0;
};

class InteractionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class SpatialBar {
public:
    SpatialBar(CylinderDisplay display, SceneLayout layout, SceneConfig scene, InteractionConfig cfg = {})
        : display_(std::move(display)), layout_(std::move(layout)), scene_(scene), cfg_(cfg) {
        if (!(cfg_.sensitivity > 0)) throw ConfigError("interaction: sensitivity must be > 0");
        if (!(cfg_.animation_ms >= 0)) throw ConfigError("interaction: animation_ms must be >= 0");
        categories_ = make_bar(display_, scene_, std::nullopt);
        for (auto c : kColors) thumbnails_[static_cast<std::size_t>(c)] = make_bar(display_, scene_, c);
    }

    const CylinderDisplay& display() const { return display_; }
    const SceneLayout& layout() const { return layout_; }
    const SceneConfig& scene() const { return scene_; }
    const InteractionConfig& config() const { return cfg_; }

    const BarModel& bar(std::optional<Color> open_color) const {
        return open_color ? thumbnails_[static_cast<std::size_t>(*open_color)] : categories_;
    }

    /// State before the first trial of a condition: cursor and gaze on `window`.
    InteractionState initial_state(int window) const {
        InteractionState s;
        s.cursor = layout_.window(window).center;
        s.gaze = s.cursor;
        s.z_order = layout_.initial_z_order();
        return s;
    }

    /// Carries cursor, gaze and stacking over; resets the bar to Categories.
    InteractionState begin_trial(const InteractionState& prev) const {
        InteractionState s;
        s.cursor = prev.cursor;
        s.gaze = prev.gaze;
        s.z_order = prev.z_order;
        return s;
    }

    Target hit(const InteractionState& s, PixelPoint p) const {
        return hit_test(display_, layout_, s.z_order, bar(s.open_color), s.next_button, p);
    }

    StepResult step(const InteractionState& state, const InputEvent& ev, Condition cond, const TrialSpec& trial) const {
        if (ev.t_ms < state.last_t) throw InteractionError("step: event time went backwards");
        if (!std::isfinite(ev.t_ms) || !std::isfinite(ev.x) || !std::isfinite(ev.y))
            throw InteractionError("step: non-finite event");
        StepResult out{state, {}};
        auto& s = out.state;
        s.last_t = ev.t_ms;
        s.started = true;

        switch (ev.kind) {
            case InputKind::CursorDelta:
                s.cursor.x += ev.x * cfg_.sensitivity;
                s.cursor.y += ev.y * cfg_.sensitivity;
                break;
            case InputKind::GazePoint:
                s.gaze = {ev.x, ev.y};
                break;
            case InputKind::Click:
                click(s, ev.t_ms, cond, trial, out.emissions);
                break;
        }
        s.highlight = highlighted(s, cond);
        return out;
    }

private:
    bool selecting(const InteractionState& s) const {
        return s.phase == Phase::SelectCategory || s.phase == Phase::SelectThumbnail;
    }

    Target highlighted(const InteractionState& s, Condition cond) const {
        if (!selecting(s)) return Target::background();
        const Target t = hit(s, cond.selection == Selection::Gaze ? s.gaze : s.cursor);
        return t.is_bar_target() ? t : Target::background();
    }

    Target resolve_click(const InteractionState& s, Condition cond) const {
        if (cond.selection == Selection::Gaze && selecting(s)) {
            const Target g = hit(s, s.gaze);
            if (g.is_bar_target()) return g;
        }
        return hit(s, s.cursor);
    }

    void raise(InteractionState& s, int window) const {
        int top = 0;
        for (int z : s.z_order) top = std::max(top, z);
        if (s.z_order[static_cast<std::size_t>(window)] != top) s.z_order[static_cast<std::size_t>(window)] = top + 1;
    }

    void click(InteractionState& s, double t, Condition cond, const TrialSpec& trial,
               std::vector<Emission>& emit) const {
        const Target target = resolve_click(s, cond);
        const auto stray = [&] {
            ++s.stray_clicks;
            emit.push_back({t, EmissionKind::StrayClick, target});
        };

        switch (target.kind) {
            case TargetKind::CategoryTile:
                if (s.phase != Phase::SelectCategory) return stray();
                s.open_color = target.color;
                s.phase = Phase::SelectThumbnail;
                if (target.color != color_of(trial.target_window)) ++s.category_detours;
                emit.push_back({t, EmissionKind::CategoryOpened, target});
                return;
            case TargetKind::GoBack:
                if (s.phase != Phase::SelectThumbnail) return stray();
                s.open_color.reset();
                s.phase = Phase::SelectCategory;
                emit.push_back({t, EmissionKind::GoBack, target});
                return;
            case TargetKind::ThumbnailTile: {
                if (s.phase != Phase::SelectThumbnail) return stray();
                raise(s, target.window);
                if (target.window != trial.target_window) {
                    ++s.errors;
                    emit.push_back({t, EmissionKind::WrongThumbnail, target});
                    return;
                }
                const auto& win = layout_.window(target.window);
                s.t_thumbnail = t;
                s.animation = Animation{bar(s.open_color).find(target)->rect, win.rect(), t, t + cfg_.animation_ms};
                s.next_button = NextButton{target.window, button_rect(trial.button_center, scene_)};
                s.phase = Phase::PressButton;
                emit.push_back({t, EmissionKind::ThumbnailConfirmed, target});
                if (cond.behavior == Behavior::Teleport) {
                    s.cursor = win.center;
                    ++s.teleports;
                    emit.push_back({t, EmissionKind::Teleport, Target::window_body(target.window)});
                }
                return;
            }
            case TargetKind::NextButton:
                if (s.phase != Phase::PressButton) return stray();
                s.t_button = t;
                s.phase = Phase::Complete;
                s.next_button.reset();
                emit.push_back({t, EmissionKind::TrialComplete, target});
                return;
            case TargetKind::WindowBody:
            case TargetKind::Background:
                return stray();
        }
    }

    CylinderDisplay display_;
    SceneLayout layout_;
    SceneConfig scene_;
    InteractionConfig cfg_;
    BarModel categories_;
    std::array<BarModel, 4> thumbnails_;
};

inline TrialTimes resolve_times(const InteractionState& s) {
    if (s.phase != Phase::Complete || !s.t_thumbnail || !s.t_button)
        throw InteractionError("resolve_times: trial is not complete");
    TrialTimes t;
    t.thumbnail_ms = *s.t_thumbnail;
    t.button_ms = *s.t_button - *s.t_thumbnail;
    t.total_ms = t.thumbnail_ms + t.button_ms;
    return t;
}

}  // namespace vwm
