#pragma once

// Two-way 2x2 fixed-effects ANOVA, the Aligned Rank Transform, Tukey HSD and
// Cohen's d.
//
// Sums of squares are Type III, computed from the cell means with +-1
// contrasts: SS = L^2 / sum(1/n_ij). For balanced data this is the textbook
// decomposition.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/fisher_f.hpp>

#include "vwm/stats/normality.hpp"
#include "vwm/stats/studentized_range.hpp"

namespace vwm::stats {

struct Observation {
    int unit = 0;
    int a = 0;  // level of factor A, 0 or 1
    int b = 0;  // level of factor B, 0 or 1
    double value = 0;
};

using FactorialDataset = std::vector<Observation>;

enum class Effect { A, B, AB };
inline constexpr std::array<Effect, 3> kEffects{Effect::A, Effect::B, Effect::AB};

inline int cell_index(int a, int b) { return a * 2 + b; }

struct EffectRow {
    double ss = 0;
    double df = 1;
    double f = 0;
    double p = 1;
    double partial_eta_sq = 0;
};

struct AnovaResult {
    std::array<EffectRow, 3> effects;  // A, B, AB
    double ss_error = 0;
    double df_error = 0;
    double ms_error = 0;
    double ss_total = 0;

    const EffectRow& operator[](Effect e) const { return effects[static_cast<std::size_t>(e)]; }
};

struct CellSummary {
    std::array<double, 4> mean{};
    std::array<double, 4> count{};
};

inline CellSummary summarize(const FactorialDataset& data) {
    CellSummary c;
    for (const auto& o : data) {
        if ((o.a != 0 && o.a != 1) || (o.b != 0 && o.b != 1)) throw StatsError("factor levels must be 0 or 1");
        if (!std::isfinite(o.value)) throw StatsError("non-finite value");
        const auto i = static_cast<std::size_t>(cell_index(o.a, o.b));
        c.mean[i] += o.value;
        c.count[i] += 1;
    }
    for (std::size_t i = 0; i < 4; ++i) {
        if (c.count[i] == 0) throw StatsError("empty cell in 2x2 design");
        c.mean[i] /= c.count[i];
    }
    return c;
}

namespace detail {

// Contrast coefficients over cells (00, 01, 10, 11).
inline std::array<double, 4> contrast(Effect e) {
    switch (e) {
        case Effect::A: return {1, 1, -1, -1};
        case Effect::B: return {1, -1, 1, -1};
        case Effect::AB: return {1, -1, -1, 1};
    }
    return {};
}

}  // namespace detail

inline AnovaResult anova_two_way(const FactorialDataset& data) {
    const auto cells = summarize(data);
    AnovaResult r;
    double grand = 0;
    for (const auto& o : data) grand += o.value;
    grand /= static_cast<double>(data.size());
    for (const auto& o : data) {
        const double d = o.value - cells.mean[static_cast<std::size_t>(cell_index(o.a, o.b))];
        r.ss_error += d * d;
        r.ss_total += (o.value - grand) * (o.value - grand);
    }
    r.df_error = static_cast<double>(data.size()) - 4;
    if (r.df_error < 1) throw StatsError("anova: need more than 4 observations");
    for (std::size_t i = 0; i < 4; ++i)
        if (cells.count[i] < 2) throw StatsError("anova: need at least 2 observations per cell");
    // Relative to the spread of the data, an error SS at rounding level is zero.
    if (!(r.ss_error > 1e-24 * std::max(1.0, r.ss_total))) throw StatsError("anova: zero error variance");
    r.ms_error = r.ss_error / r.df_error;

    double inv_n = 0;
    for (double n : cells.count) inv_n += 1 / n;
    const boost::math::fisher_f_distribution<> fdist(1, r.df_error);
    for (auto e : kEffects) {
        const auto c = detail::contrast(e);
        double l = 0;
        for (std::size_t i = 0; i < 4; ++i) l += c[i] * cells.mean[i];
        auto& row = r.effects[static_cast<std::size_t>(e)];
        row.ss = l * l / inv_n;
        row.f = row.ss / r.ms_error;
        row.p = boost::math::cdf(boost::math::complement(fdist, row.f));
        row.partial_eta_sq = row.ss / (row.ss + r.ss_error);
    }
    return r;
}

/// Aligned values for one effect: residual from the cell mean plus the
/// estimated effect, with marginal means taken as unweighted means of cells.
inline FactorialDataset art_align(const FactorialDataset& data, Effect effect) {
    const auto cells = summarize(data);
    const auto& m = cells.mean;
    const double grand = (m[0] + m[1] + m[2] + m[3]) / 4;
    const std::array<double, 2> a_mean{(m[0] + m[1]) / 2, (m[2] + m[3]) / 2};
    const std::array<double, 2> b_mean{(m[0] + m[2]) / 2, (m[1] + m[3]) / 2};
    FactorialDataset out = data;
    for (auto& o : out) {
        const double cell = m[static_cast<std::size_t>(cell_index(o.a, o.b))];
        const double ai = a_mean[static_cast<std::size_t>(o.a)];
        const double bj = b_mean[static_cast<std::size_t>(o.b)];
        double est = 0;
        switch (effect) {
            case Effect::A: est = ai - grand; break;
            case Effect::B: est = bj - grand; break;
            case Effect::AB: est = cell - ai - bj + grand; break;
        }
        o.value = o.value - cell + est;
    }
    return out;
}

/// 1-based ranks, ties get the average of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2 + 1;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline FactorialDataset rank_transform(const FactorialDataset& data) {
    std::vector<double> v;
    v.reserve(data.size());
    for (const auto& o : data) v.push_back(o.value);
    const auto r = average_ranks(v);
    FactorialDataset out = data;
    for (std::size_t i = 0; i < out.size(); ++i) out[i].value = r[i];
    return out;
}

// Aligned values that differ only by rounding are ties.
inline FactorialDataset snap_ties(FactorialDataset data) {
    double scale = 0;
    for (const auto& o : data) scale = std::max(scale, std::abs(o.value));
    const double tol = 1e-10 * std::max(scale, 1e-300);
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return data[i].value < data[j].value; });
    for (std::size_t i = 1; i < idx.size(); ++i)
        if (data[idx[i]].value - data[idx[i - 1]].value <= tol) data[idx[i]].value = data[idx[i - 1]].value;
    return data;
}

/// ART ANOVA: for each effect, align, rank, run the full model and keep that
/// effect's row. The error terms of the three models differ.
struct ArtResult {
    std::array<AnovaResult, 3> models;  // model aligned for A, B, AB
    AnovaResult table;                  // row e taken from models[e]
};

inline ArtResult art_anova(const FactorialDataset& data) {
    ArtResult out;
    for (auto e : kEffects) {
        const auto i = static_cast<std::size_t>(e);
        out.models[i] = anova_two_way(rank_transform(snap_ties(art_align(data, e))));
        out.table.effects[i] = out.models[i].effects[i];
    }
    // Error terms differ per effect; report those of the A model as representative.
    out.table.ss_error = out.models[0].ss_error;
    out.table.df_error = out.models[0].df_error;
    out.table.ms_error = out.models[0].ms_error;
    out.table.ss_total = out.models[0].ss_total;
    return out;
}

struct ContrastResult {
    int first = 0;   // cell index
    int second = 0;  // cell index
    double mean_difference = 0;  // mean(second) - mean(first), on the raw scale
    double q = 0;
    double p = 1;
    double cohen_d = 0;
};

/// Tukey-Kramer pairwise comparisons of k group means. With equal n this is
/// q = |diff| / sqrt(ms_error / n).
inline std::vector<ContrastResult> tukey_hsd(std::span<const double> means, std::span<const double> counts,
                                             double ms_error, double df_error) {
    if (means.size() < 2 || means.size() != counts.size()) throw StatsError("tukey_hsd: need k >= 2 groups");
    if (!(df_error > 0)) throw StatsError("tukey_hsd: df_error must be > 0");
    if (!(ms_error > 0)) throw StatsError("tukey_hsd: ms_error must be > 0");
    const int k = static_cast<int>(means.size());
    std::vector<ContrastResult> out;
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            const auto si = static_cast<std::size_t>(i);
            const auto sj = static_cast<std::size_t>(j);
            if (!(counts[si] > 0 && counts[sj] > 0)) throw StatsError("tukey_hsd: empty group");
            ContrastResult c;
            c.first = i;
            c.second = j;
            c.mean_difference = means[sj] - means[si];
            const double se = std::sqrt(ms_error / 2 * (1 / counts[si] + 1 / counts[sj]));
            c.q = std::abs(c.mean_difference) / se;
            c.p = ptukey_sf(c.q, k, df_error);
            out.push_back(c);
        }
    }
    return out;
}

inline std::vector<ContrastResult> tukey_hsd(std::span<const double> means, double ms_error, double df_error,
                                             double n_per_group) {
    const std::vector<double> counts(means.size(), n_per_group);
    return tukey_hsd(means, counts, ms_error, df_error);
}

/// (mean2 - mean1) / pooled standard deviation.
inline double cohen_d(std::span<const double> g1, std::span<const double> g2) {
    if (g1.size() < 2 || g2.size() < 2) throw StatsError("cohen_d: each group needs n >= 2");
    const auto moments = [](std::span<const double> g) {
        double m = 0;
        for (double v : g) m += v;
        m /= static_cast<double>(g.size());
        double ss = 0;
        for (double v : g) ss += (v - m) * (v - m);
        return std::pair{m, ss};
    };
    const auto [m1, ss1] = moments(g1);
    const auto [m2, ss2] = moments(g2);
    const double pooled = std::sqrt((ss1 + ss2) / static_cast<double>(g1.size() + g2.size() - 2));
    if (!(pooled > 0)) throw StatsError("cohen_d: zero pooled standard deviation");
    return (m2 - m1) / pooled;
}

}  // namespace vwm::stats
