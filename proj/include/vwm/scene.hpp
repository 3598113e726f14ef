#pragma once

// Study scene: 20 colour/number windows on two semicircles around the bar
// centre, the two-level bar (colour categories, then thumbnails + Go Back),
// and the per-trial Next-task button.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vwm/geometry.hpp"
#include "vwm/kv.hpp"
#include "vwm/random.hpp"

namespace vwm {

enum class Color { Red, Green, Blue, Yellow };
inline constexpr std::array<Color, 4> kColors{Color::Red, Color::Green, Color::Blue, Color::Yellow};
inline constexpr int kNumbersPerColor = 5;
inline constexpr int kWindowCount = 20;

inline std::string_view to_string(Color c) {
    switch (c) {
        case Color::Red: return "Red";
        case Color::Green: return "Green";
        case Color::Blue: return "Blue";
        case Color::Yellow: return "Yellow";
    }
    return "?";
}

inline Color parse_color(std::string_view s) {
    for (auto c : kColors)
        if (to_string(c) == s) return c;
    throw ConfigError("unknown colour: " + std::string(s));
}

/// Window ids are dense: id = colour * 5 + (number - 1), so Red-1 is 0.
constexpr int window_id(Color c, int number) { return static_cast<int>(c) * kNumbersPerColor + number - 1; }
constexpr Color color_of(int id) { return static_cast<Color>(id / kNumbersPerColor); }
constexpr int number_of(int id) { return id % kNumbersPerColor + 1; }
inline constexpr int kRedOne = window_id(Color::Red, 1);

inline std::string window_name(int id) {
    return std::string(to_string(color_of(id))) + "-" + std::to_string(number_of(id));
}

enum class Ring { Short, Large };

inline char ring_letter(Ring r) { return r == Ring::Short ? 'S' : 'L'; }

struct SceneConfig {
    double short_ring_m = 0.25;
    double large_ring_m = 0.70;
    double bar_width_px = 1920;
    double tile_padding_px = 16;
    double button_radius_px = 300;
    double button_width_px = 200;
    double button_height_px = 80;

    static constexpr std::array<const char*, 7> keys{"short_ring_m",     "large_ring_m",    "bar_width_px",
                                                     "tile_padding_px",  "button_radius_px", "button_width_px",
                                                     "button_height_px"};

    static SceneConfig from_kv(const KeyValues& kv) {
        SceneConfig c;
        kv.read("short_ring_m", c.short_ring_m);
        kv.read("large_ring_m", c.large_ring_m);
        kv.read("bar_width_px", c.bar_width_px);
        kv.read("tile_padding_px", c.tile_padding_px);
        kv.read("button_radius_px", c.button_radius_px);
        kv.read("button_width_px", c.button_width_px);
        kv.read("button_height_px", c.button_height_px);
        return c;
    }

    void to_kv(KeyValues& kv) const {
        kv.set("short_ring_m", short_ring_m);
        kv.set("large_ring_m", large_ring_m);
        kv.set("bar_width_px", bar_width_px);
        kv.set("tile_padding_px", tile_padding_px);
        kv.set("button_radius_px", button_radius_px);
        kv.set("button_width_px", button_width_px);
        kv.set("button_height_px", button_height_px);
    }
};

struct WindowSpec {
    int id = 0;
    Color color = Color::Red;
    int number = 1;
    PixelPoint center;
    double width_px = 0;
    double height_px = 0;
    int z_order = 0;

    Rect rect() const { return Rect::centered(center, width_px, height_px); }
};

struct SceneLayout {
    std::vector<WindowSpec> windows;  // indexed by window id
    std::vector<Ring> ring_of;        // indexed by window id
    PixelPoint bar_center;
    std::uint64_t seed = 0;

    const WindowSpec& window(int id) const { return windows.at(static_cast<std::size_t>(id)); }
    Ring ring(int id) const { return ring_of.at(static_cast<std::size_t>(id)); }

    std::vector<int> windows_in(Ring r) const {
        std::vector<int> ids;
        for (int id = 0; id < static_cast<int>(ring_of.size()); ++id)
            if (ring_of[static_cast<std::size_t>(id)] == r) ids.push_back(id);
        return ids;
    }

    std::vector<int> initial_z_order() const {
        std::vector<int> z;
        for (const auto& w : windows) z.push_back(w.z_order);
        return z;
    }
};

enum class TargetKind { Background, CategoryTile, ThumbnailTile, GoBack, NextButton, WindowBody };

struct Target {
    TargetKind kind = TargetKind::Background;
    Color color = Color::Red;  // CategoryTile, ThumbnailTile
    int number = 0;            // ThumbnailTile
    int window = -1;           // ThumbnailTile, NextButton, WindowBody

    static Target background() { return {}; }
    static Target category(Color c) { return {TargetKind::CategoryTile, c, 0, -1}; }
    static Target thumbnail(Color c, int n) { return {TargetKind::ThumbnailTile, c, n, window_id(c, n)}; }
    static Target go_back() { return {TargetKind::GoBack, Color::Red, 0, -1}; }
    static Target next_button(int w) { return {TargetKind::NextButton, Color::Red, 0, w}; }
    static Target window_body(int w) { return {TargetKind::WindowBody, Color::Red, 0, w}; }

    bool is_bar_target() const {
        return kind == TargetKind::CategoryTile || kind == TargetKind::ThumbnailTile || kind == TargetKind::GoBack;
    }

    friend bool operator==(const Target&, const Target&) = default;
};

inline std::string to_string(const Target& t) {
    switch (t.kind) {
        case TargetKind::Background: return "background";
        case TargetKind::CategoryTile: return "category:" + std::string(to_string(t.color));
        case TargetKind::ThumbnailTile: return "thumbnail:" + window_name(t.window);
        case TargetKind::GoBack: return "go_back";
        case TargetKind::NextButton: return "next_button:" + window_name(t.window);
        case TargetKind::WindowBody: return "window:" + window_name(t.window);
    }
    return "?";
}

struct BarTile {
    Target target;
    Rect rect;
};

/// Bar contents for one level. Categories has 4 tiles; Thumbnails has the 5
/// windows of the open colour followed by Go Back.
struct BarModel {
    std::optional<Color> open_color;  // empty = Categories level
    std::vector<BarTile> tiles;

    bool at_categories() const { return !open_color.has_value(); }

    const BarTile* find(const Target& t) const {
        for (const auto& tile : tiles)
            if (tile.target == t) return &tile;
        return nullptr;
    }
};

inline BarModel make_bar(const CylinderDisplay& display, const SceneConfig& cfg, std::optional<Color> open_color) {
    BarModel bar;
    bar.open_color = open_color;
    std::vector<Target> slots;
    if (!open_color) {
        for (auto c : kColors) slots.push_back(Target::category(c));
    } else {
        for (int n = 1; n <= kNumbersPerColor; ++n) slots.push_back(Target::thumbnail(*open_color, n));
        slots.push_back(Target::go_back());
    }
    const double slot_w = cfg.bar_width_px / static_cast<double>(slots.size());
    const double x_start = display.width_px() / 2 - cfg.bar_width_px / 2;
    const double pad = cfg.tile_padding_px;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const double x0 = x_start + slot_w * static_cast<double>(i);
        bar.tiles.push_back({slots[i], Rect{x0 + pad, display.bar_top_px() + pad, x0 + slot_w - pad,
                                            display.bar_bottom_px() - pad}});
    }
    return bar;
}

/// Next-task button of the active window.
struct NextButton {
    int window = -1;
    Rect rect;
};

namespace detail {

// Smallest angle above the horizontal (measured at the bar centre) for which a
// window rect on a ring of radius `r` stays on the display.
inline double min_ring_angle(const CylinderDisplay& d, PixelPoint bar_c, double r, double win_w, double win_h) {
    if (r + win_h / 2 > bar_c.y)
        throw ConfigError("scene: ring of radius " + format_double(r) + " px does not fit above the bar");
    const double need_rise = bar_c.y + win_h / 2 - d.height_px();
    double angle = need_rise > 0 ? std::asin(need_rise / r) : 0.0;
    if (need_rise > r) throw ConfigError("scene: ring too small to clear the bar");
    const double half_room = d.width_px() / 2 - win_w / 2;
    if (half_room < 0) throw ConfigError("scene: window wider than the display");
    if (r > half_room) angle = std::max(angle, std::acos(half_room / r));
    if (angle >= std::numbers::pi / 2) throw ConfigError("scene: no room for a ring of this radius");
    return angle;
}

}  // namespace detail

/// Ten windows per ring, evenly spaced in angle about the bar centre over the
/// part of the upper semicircle where their rects stay on the display. The
/// seed only permutes which (colour, number) sits in which slot.
inline SceneLayout build_layout(const CylinderDisplay& display, const SceneConfig& cfg, std::uint64_t seed) {
    SceneLayout layout;
    layout.seed = seed;
    layout.bar_center = {display.width_px() / 2, (display.bar_top_px() + display.bar_bottom_px()) / 2};
    const double win_w = display.width_px() / 5;
    const double win_h = display.height_px() / 5;

    struct Slot {
        PixelPoint center;
        Ring ring;
    };
    std::vector<Slot> slots;
    constexpr int per_ring = kWindowCount / 2;
    for (Ring ring : {Ring::Short, Ring::Large}) {
        const double r = (ring == Ring::Short ? cfg.short_ring_m : cfg.large_ring_m) * display.px_per_m();
        const double lo = detail::min_ring_angle(display, layout.bar_center, r, win_w, win_h);
        const double step = (std::numbers::pi - 2 * lo) / (per_ring - 1);
        for (int i = 0; i < per_ring; ++i) {
            const double a = lo + step * i;
            slots.push_back({{layout.bar_center.x + r * std::cos(a), layout.bar_center.y - r * std::sin(a)}, ring});
        }
    }

    std::vector<int> ids(kWindowCount);
    for (int i = 0; i < kWindowCount; ++i) ids[static_cast<std::size_t>(i)] = i;
    auto rng = make_stream(seed, {0x6c61796fULL});
    shuffle(std::span<int>(ids), rng);

    layout.windows.resize(kWindowCount);
    layout.ring_of.resize(kWindowCount);
    for (std::size_t slot = 0; slot < slots.size(); ++slot) {
        const int id = ids[slot];
        auto& w = layout.windows[static_cast<std::size_t>(id)];
        w.id = id;
        w.color = color_of(id);
        w.number = number_of(id);
        w.center = slots[slot].center;
        w.width_px = win_w;
        w.height_px = win_h;
        w.z_order = id;
        layout.ring_of[static_cast<std::size_t>(id)] = slots[slot].ring;
    }
    return layout;
}

/// Button centre at exactly `button_radius_px` from the window centre, in a
/// uniformly random direction.
inline PixelPoint place_next_button(const WindowSpec& window, const SceneConfig& cfg, Rng& rng) {
    const double half_diag = std::hypot(cfg.button_width_px / 2, cfg.button_height_px / 2);
    if (cfg.button_radius_px < half_diag)
        throw ConfigError("scene: button_radius_px smaller than the button half-diagonal");
    if (cfg.button_radius_px + cfg.button_width_px / 2 > window.width_px / 2 ||
        cfg.button_radius_px + cfg.button_height_px / 2 > window.height_px / 2)
        throw ConfigError("scene: button does not fit inside the window in every direction");
    const double angle = uniform(rng, 0.0, 2 * std::numbers::pi);
    return {window.center.x + cfg.button_radius_px * std::cos(angle),
            window.center.y + cfg.button_radius_px * std::sin(angle)};
}

inline Rect button_rect(PixelPoint center, const SceneConfig& cfg) {
    return Rect::centered(center, cfg.button_width_px, cfg.button_height_px);
}

/// Topmost element under `p`. Bar tiles are only reachable inside the bar
/// strip; the Next button only when it is visible on the active window.
inline Target hit_test(const CylinderDisplay& display, const SceneLayout& layout, std::span<const int> z_order,
                       const BarModel& bar, const std::optional<NextButton>& button, PixelPoint p) {
    if (display.bar_strip().contains(p)) {
        for (const auto& tile : bar.tiles)
            if (tile.rect.contains(p)) return tile.target;
        return Target::background();
    }
    int top = -1;
    int top_z = 0;
    for (const auto& w : layout.windows) {
        const int z = z_order[static_cast<std::size_t>(w.id)];
        if (w.rect().contains(p) && (top < 0 || z > top_z)) {
            top = w.id;
            top_z = z;
        }
    }
    if (button && button->rect.contains(p) && (top < 0 || top == button->window))
        return Target::next_button(button->window);
    if (top >= 0) return Target::window_body(top);
    return Target::background();
}

inline Target hit_test(const CylinderDisplay& display, const SceneLayout& layout, const BarModel& bar, PixelPoint p) {
    const auto z = layout.initial_z_order();
    return hit_test(display, layout, z, bar, std::nullopt, p);
}

/// Line-oriented dump: `id,color,number,cx,cy,ring`.
inline std::string dump_layout(const SceneLayout& layout) {
    std::ostringstream out;
    out << "id,color,number,cx,cy,ring\n";
    for (const auto& w : layout.windows)
        out << w.id << ',' << to_string(w.color) << ',' << w.number << ',' << format_double(w.center.x) << ','
            << format_double(w.center.y) << ',' << (layout.ring(w.id) == Ring::Short ? "Short" : "Large") << '\n';
    return out.str();
}

}  // namespace vwm
