#pragma once

// Cylindrical virtual display and the bar strip below it.
//
// Frame: y is up, the cylinder axis is vertical through the viewer's head at
// the origin, and the display is centred at azimuth 0 on the -z axis. Pixel x
// grows with azimuth (to the viewer's right), pixel y grows downward. The bar
// strip is the same cylindrical surface continued below the display, so the
// pixel plane is one unrolled sheet and pixel distances are arc lengths.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "vwm/kv.hpp"

namespace vwm {

struct PixelPoint {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const { return *this * (1.0 / norm()); }
};

/// A point on the cylinder surface (meters, viewer-centred frame).
using SurfacePoint = Vec3;

struct Rect {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    static Rect centered(PixelPoint c, double w, double h) {
        return {c.x - w / 2, c.y - h / 2, c.x + w / 2, c.y + h / 2};
    }
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    PixelPoint center() const { return {(x0 + x1) / 2, (y0 + y1) / 2}; }
    bool contains(PixelPoint p) const { return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1; }
    bool overlaps(const Rect& o) const { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }
    /// Closest point of the rect to `p`.
    PixelPoint clamp(PixelPoint p) const {
        return {std::clamp(p.x, x0, x1), std::clamp(p.y, y0, y1)};
    }

    friend bool operator==(const Rect&, const Rect&) = default;
};

/// Display descriptor. Lengths in meters, pixels as floats.
struct DisplayConfig {
    double radius_m = 1.0;
    double width_px = 7680;
    double height_px = 4320;
    double diagonal_in = 74;
    double bar_offset_px = 40;
    double bar_height_px = 480;
    double eye_height_m = 1.2;

    static constexpr std::array<const char*, 7> keys{"radius_m",      "width_px",      "height_px",
                                                     "diagonal_in",   "bar_offset_px", "bar_height_px",
                                                     "eye_height_m"};

    static DisplayConfig from_kv(const KeyValues& kv) {
        DisplayConfig c;
        kv.read("radius_m", c.radius_m);
        kv.read("width_px", c.width_px);
        kv.read("height_px", c.height_px);
        kv.read("diagonal_in", c.diagonal_in);
        kv.read("bar_offset_px", c.bar_offset_px);
        kv.read("bar_height_px", c.bar_height_px);
        kv.read("eye_height_m", c.eye_height_m);
        return c;
    }

    void to_kv(KeyValues& kv) const {
        kv.set("radius_m", radius_m);
        kv.set("width_px", width_px);
        kv.set("height_px", height_px);
        kv.set("diagonal_in", diagonal_in);
        kv.set("bar_offset_px", bar_offset_px);
        kv.set("bar_height_px", bar_height_px);
        kv.set("eye_height_m", eye_height_m);
    }
};

class GeometryError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Result of projecting a surface point back into pixel space. Points outside
/// the display+bar extent are returned unclamped and flagged.
struct PixelProjection {
    PixelPoint pixel;
    bool in_extent = false;
};

class CylinderDisplay {
public:
    static constexpr double kMetersPerInch = 0.0254;
    static constexpr double kOnSurfaceTolerance = 1e-6;

    CylinderDisplay() : CylinderDisplay(DisplayConfig{}) {}

    explicit CylinderDisplay(const DisplayConfig& cfg) : cfg_(cfg) {
        const bool finite = std::isfinite(cfg.radius_m) && std::isfinite(cfg.width_px) &&
                            std::isfinite(cfg.height_px) && std::isfinite(cfg.diagonal_in) &&
                            std::isfinite(cfg.bar_offset_px) && std::isfinite(cfg.bar_height_px) &&
                            std::isfinite(cfg.eye_height_m);
        if (!finite) throw ConfigError("display: non-finite parameter");
        if (cfg.radius_m <= 0) throw ConfigError("display: radius_m must be > 0");
        if (cfg.width_px <= 0 || cfg.height_px <= 0 || cfg.diagonal_in <= 0)
            throw ConfigError("display: sizes must be > 0");
        if (cfg.bar_offset_px < 0 || cfg.bar_height_px <= 0)
            throw ConfigError("display: bar strip must have offset >= 0 and height > 0");

        // Square pixels: the physical aspect equals the pixel aspect.
        const double diag_m = cfg.diagonal_in * kMetersPerInch;
        const double diag_px = std::hypot(cfg.width_px, cfg.height_px);
        width_m_ = diag_m * cfg.width_px / diag_px;
        height_m_ = diag_m * cfg.height_px / diag_px;
        px_per_m_ = cfg.width_px / width_m_;
        if (width_m_ / cfg.radius_m >= 2 * std::numbers::pi)
            throw ConfigError("display: arc wraps past a full turn at this radius");
    }

    const DisplayConfig& config() const { return cfg_; }
    double radius_m() const { return cfg_.radius_m; }
    double width_px() const { return cfg_.width_px; }
    double height_px() const { return cfg_.height_px; }
    double width_m() const { return width_m_; }
    double height_m() const { return height_m_; }
    double px_per_m() const { return px_per_m_; }
    double eye_height_m() const { return cfg_.eye_height_m; }

    double bar_top_px() const { return cfg_.height_px + cfg_.bar_offset_px; }
    double bar_bottom_px() const { return bar_top_px() + cfg_.bar_height_px; }
    /// Bottom edge of the addressable sheet (display + gap + bar).
    double extent_bottom_px() const { return bar_bottom_px(); }
    Rect display_rect() const { return {0, 0, cfg_.width_px, cfg_.height_px}; }
    Rect bar_strip() const { return {0, bar_top_px(), cfg_.width_px, bar_bottom_px()}; }

    double azimuth_of(double px) const { return (px - cfg_.width_px / 2) / px_per_m_ / cfg_.radius_m; }
    double height_of(double py) const { return cfg_.eye_height_m + (cfg_.height_px / 2 - py) / px_per_m_; }

    bool in_extent(PixelPoint p) const {
        return p.x >= 0 && p.x <= cfg_.width_px && p.y >= 0 && p.y <= extent_bottom_px();
    }

    /// Pixel -> surface. Isometric along the arc and vertically.
    SurfacePoint pixel_to_world(PixelPoint p) const {
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw GeometryError("pixel_to_world: non-finite pixel");
        const double az = azimuth_of(p.x);
        return {cfg_.radius_m * std::sin(az), height_of(p.y), -cfg_.radius_m * std::cos(az)};
    }

    PixelProjection world_to_pixel(const SurfacePoint& s) const {
        if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.z))
            throw GeometryError("world_to_pixel: non-finite point");
        const double r = std::hypot(s.x, s.z);
        if (std::abs(r - cfg_.radius_m) > kOnSurfaceTolerance)
            throw GeometryError("world_to_pixel: point is off the cylinder");
        const double az = std::atan2(s.x, -s.z);
        PixelPoint p{cfg_.width_px / 2 + az * cfg_.radius_m * px_per_m_,
                     cfg_.height_px / 2 - (s.y - cfg_.eye_height_m) * px_per_m_};
        return {p, in_extent(p)};
    }

    /// First hit of the ray with the cylinder wall. Empty when the ray runs
    /// parallel to the axis or the hit lies above/below the display+bar extent.
    std::optional<PixelPoint> raycast(const Vec3& origin, const Vec3& dir) const {
        if (std::abs(dir.norm() - 1.0) > 1e-9) throw GeometryError("raycast: direction must be unit length");
        const double r2 = cfg_.radius_m * cfg_.radius_m;
        const double c = origin.x * origin.x + origin.z * origin.z - r2;
        if (!(c < 0)) throw GeometryError("raycast: origin must be inside the cylinder");
        const double a = dir.x * dir.x + dir.z * dir.z;
        if (a < 1e-18) return std::nullopt;
        const double b = 2 * (origin.x * dir.x + origin.z * dir.z);
        const double disc = b * b - 4 * a * c;  // > 0 since c < 0
        // Roots have opposite signs; take the positive one without cancellation.
        const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
        const double t = std::signbit(b) ? q / a : c / q;
        Vec3 hit = origin + dir * t;
        // Snap onto the surface to absorb rounding in the solve.
        const double scale = cfg_.radius_m / std::hypot(hit.x, hit.z);
        hit.x *= scale;
        hit.z *= scale;
        const auto proj = world_to_pixel(hit);
        if (proj.pixel.y < 0 || proj.pixel.y > extent_bottom_px()) return std::nullopt;
        return proj.pixel;
    }

private:
    DisplayConfig cfg_;
    double width_m_ = 0;
    double height_m_ = 0;
    double px_per_m_ = 0;
};

/// Geodesic distance in pixels; exact because the unrolled sheet is isometric.
inline double arc_distance_px(const CylinderDisplay&, PixelPoint a, PixelPoint b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

inline double distance_px(PixelPoint a, PixelPoint b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace vwm
