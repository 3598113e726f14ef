#pragma once

// Shapiro-Wilk W test with Royston's polynomial approximations for the
// coefficients and the p-value (valid for 3 <= n <= 5000).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/normal.hpp>

namespace vwm::stats {

class StatsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ShapiroWilk {
    double w = 1;
    double p = 1;
};

namespace detail {

// c[0] + c[1] x + c[2] x^2 + ...
template <std::size_t N>
double poly(const double (&c)[N], double x) {
    double r = c[N - 1];
    for (std::size_t i = N - 1; i-- > 0;) r = r * x + c[i];
    return r;
}

}  // namespace detail

inline ShapiroWilk shapiro_wilk(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 3 || n > 5000) throw StatsError("shapiro_wilk: need 3 <= n <= 5000");
    std::vector<double> x(values.begin(), values.end());
    for (double v : x)
        if (!std::isfinite(v)) throw StatsError("shapiro_wilk: non-finite value");
    std::sort(x.begin(), x.end());
    if (x.back() - x.front() < 1e-19 * std::max(1.0, std::abs(x.front())))
        throw StatsError("shapiro_wilk: all values identical, W undefined");

    const boost::math::normal_distribution<> unit;
    const double nn = static_cast<double>(n);

    // Coefficients, antisymmetric: a[n-1-i] = -a[i].
    std::vector<double> a(n, 0.0);
    if (n == 3) {
        a[0] = -std::sqrt(0.5);
        a[2] = std::sqrt(0.5);
    } else {
        std::vector<double> m(n);
        double summ2 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = boost::math::quantile(unit, (static_cast<double>(i + 1) - 0.375) / (nn + 0.25));
            summ2 += m[i] * m[i];
        }
        const double ssumm2 = std::sqrt(summ2);
        const double u = 1 / std::sqrt(nn);
        static const double c1[] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
        static const double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
        const double an = m[n - 1] / ssumm2 + detail::poly(c1, u);
        std::size_t first = 1;
        double phi = 0;
        if (n > 5) {
            const double an1 = m[n - 2] / ssumm2 + detail::poly(c2, u);
            phi = (summ2 - 2 * m[n - 1] * m[n - 1] - 2 * m[n - 2] * m[n - 2]) / (1 - 2 * an * an - 2 * an1 * an1);
            a[n - 2] = an1;
            a[1] = -an1;
            first = 2;
        } else {
            phi = (summ2 - 2 * m[n - 1] * m[n - 1]) / (1 - 2 * an * an);
        }
        a[n - 1] = an;
        a[0] = -an;
        const double root = std::sqrt(phi);
        for (std::size_t i = first; i < n - first; ++i) a[i] = m[i] / root;
    }

    double mean = 0;
    for (double v : x) mean += v;
    mean /= nn;
    double ssq = 0, num = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ssq += (x[i] - mean) * (x[i] - mean);
        num += a[i] * (x[i] - mean);
    }
    ShapiroWilk out;
    out.w = std::min(1.0, num * num / ssq);

    if (n == 3) {
        constexpr double pi6 = 6 / std::numbers::pi;
        const double stqr = std::asin(std::sqrt(0.75));
        out.p = std::clamp(pi6 * (std::asin(std::sqrt(out.w)) - stqr), 0.0, 1.0);
        return out;
    }
    const double y = std::log1p(-out.w);
    double z = 0;
    if (n <= 11) {
        static const double g[] = {-2.273, 0.459};
        static const double c3[] = {0.5440, -0.39978, 0.025054, -6.714e-4};
        static const double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
        const double gamma = detail::poly(g, nn);
        if (y >= gamma) {
            out.p = 0;
            return out;
        }
        const double yy = -std::log(gamma - y);
        z = (yy - detail::poly(c3, nn)) / std::exp(detail::poly(c4, nn));
    } else {
        static const double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
        static const double c6[] = {-0.4803, -0.082676, 0.0030302};
        const double ln = std::log(nn);
        z = (y - detail::poly(c5, ln)) / std::exp(detail::poly(c6, ln));
    }
    out.p = boost::math::cdf(boost::math::complement(unit, z));
    return out;
}

}  // namespace vwm::stats
