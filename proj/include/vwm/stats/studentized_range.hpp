#pragma once

// Studentized range distribution by direct numerical integration:
//
//   P(Q > q; k, df) = integral_0^inf f_s(s) * (1 - W(q s; k)) ds
//   W(w; k)         = k * integral phi(z) [Phi(z) - Phi(z - w)]^(k-1) dz
//
// where s = sqrt(chi2_df / df). For df beyond ~1e5 the s-density is a spike
// at 1 and the outer integral is skipped.

#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/tools/roots.hpp>

#include "vwm/stats/normality.hpp"

namespace vwm::stats {

namespace detail {

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
inline double norm_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi); }

// 1 - W(w; k): probability that the range of k standard normals exceeds w.
inline double range_sf(double w, int k) {
    if (w <= 0) return 1;
    const auto integrand = [w, k](double z) {
        const double upper = norm_cdf(z);
        const double inside = upper - norm_cdf(z - w);
        return norm_pdf(z) * (std::pow(upper, k - 1) - std::pow(inside, k - 1));
    };
    // phi(z) is below 1e-18 outside [-9, 9 + w]; the integrand is smooth, so a
    // fixed 20-point rule per unit panel is accurate to ~1e-14.
    using G = boost::math::quadrature::gauss<double, 20>;
    const double hi = 9.0 + w;
    const int panels = static_cast<int>(std::ceil(hi + 9.0));
    const double h = (hi + 9.0) / panels;
    double r = 0;
    for (int i = 0; i < panels; ++i) r += G::integrate(integrand, -9.0 + i * h, -9.0 + (i + 1) * h);
    return std::clamp(k * r, 0.0, 1.0);
}

inline double log_s_density(double s, double df) {
    // s = sqrt(X/df), X ~ chi2(df)
    return (df / 2) * std::log(df / 2) - std::lgamma(df / 2) + std::log(2.0) + (df - 1) * std::log(s) -
           df * s * s / 2;
}

// Adaptive Gauss-Kronrod that also stops on a small absolute error: the
// inner range integral has an absolute noise floor near 1e-16, so a purely
// relative tolerance cannot be met far in the tail.
template <class F>
double adaptive_gk(const F& f, double a, double b, int depth) {
    using Q = boost::math::quadrature::gauss_kronrod<double, 21>;
    double err = 0;
    const double r = Q::integrate(f, a, b, 0, 0.0, &err);
    if (depth == 0 || err <= std::max(1e-9 * std::abs(r), 1e-15 * (b - a))) return r;
    const double mid = (a + b) / 2;
    return adaptive_gk(f, a, mid, depth - 1) + adaptive_gk(f, mid, b, depth - 1);
}

}  // namespace detail

/// Upper tail P(Q > q) of the studentized range with k groups and df degrees of freedom.
inline double ptukey_sf(double q, int k, double df) {
    if (k < 2) throw StatsError("ptukey: k must be >= 2");
    if (!(df > 0)) throw StatsError("ptukey: df must be > 0");
    if (std::isnan(q)) throw StatsError("ptukey: q is NaN");
    if (q <= 0) return 1;
    if (std::isinf(q)) return 0;
    if (df > 1e5) return detail::range_sf(q, k);

    const double sd = 1 / std::sqrt(2 * df);
    const double lo = std::max(0.0, 1 - 14 * sd);
    const double hi = 1 + 14 * sd + (df < 10 ? 12.0 / df : 0.0);
    const auto integrand = [q, k, df](double s) {
        if (s <= 0) return 0.0;
        return std::exp(detail::log_s_density(s, df)) * detail::range_sf(q * s, k);
    };
    const double r = detail::adaptive_gk(integrand, lo, hi, 12);
    return std::clamp(r, 0.0, 1.0);
}

inline double ptukey_cdf(double q, int k, double df) { return 1 - ptukey_sf(q, k, df); }

/// Critical value q with P(Q > q) = alpha.
inline double qtukey(double alpha, int k, double df) {
    if (!(alpha > 0 && alpha < 1)) throw StatsError("qtukey: alpha must be in (0, 1)");
    double lo = 0, hi = 4;
    while (ptukey_sf(hi, k, df) > alpha) {
        lo = hi;
        hi *= 2;
        if (hi > 1e4) throw StatsError("qtukey: no bracket");
    }
    std::uintmax_t iters = 200;
    const auto f = [&](double q) { return ptukey_sf(q, k, df) - alpha; };
    const auto r = boost::math::tools::toms748_solve(f, lo, hi, f(lo), f(hi), boost::math::tools::eps_tolerance<double>(40),
                                                     iters);
    return (r.first + r.second) / 2;
}

}  // namespace vwm::stats
