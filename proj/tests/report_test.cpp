#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "vwm/report.hpp"

namespace vwm {
namespace {

constexpr std::size_t kGT = 0, kGS = 1, kCT = 2, kCS = 3;

class ReportTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        StudyConfig cfg;
        records_ = new std::vector<TrialRecord>(all_records(simulate_study(cfg)));
    }
    static void TearDownTestSuite() {
        delete records_;
        records_ = nullptr;
    }
    static const std::vector<TrialRecord>& records() { return *records_; }

private:
    static std::vector<TrialRecord>* records_;
};

std::vector<TrialRecord>* ReportTest::records_ = nullptr;

TEST_F(ReportTest, DatasetHasOneMeanPerParticipantAndCondition) {
    const auto d = block_dataset(records(), Measure::Thumbnail, Block::Overall);
    EXPECT_EQ(d.size(), 64u);
    const auto large = block_dataset(records(), Measure::Thumbnail, Block::Large);
    EXPECT_EQ(large.size(), 64u);
    // The Overall mean of a participant/condition is the mean of its 52 trials.
    double sum = 0;
    int n = 0;
    for (const auto& r : records())
        if (r.recorded() && r.participant == 3 && condition_index(r.condition) == 2) {
            sum += r.thumbnail_ms;
            ++n;
        }
    ASSERT_EQ(n, 52);
    const auto it = std::find_if(d.begin(), d.end(), [](const auto& o) { return o.unit == 3 && o.a == 1 && o.b == 0; });
    ASSERT_NE(it, d.end());
    EXPECT_NEAR(it->value, sum / n, 1e-9);
}

TEST_F(ReportTest, BlockMembershipFollowsMeasure) {
    TrialRecord r;
    r.pair = DistancePair::LS;
    EXPECT_TRUE(in_block(r, Measure::Thumbnail, Block::Large));
    EXPECT_TRUE(in_block(r, Measure::Button, Block::Short));
    EXPECT_FALSE(in_block(r, Measure::Button, Block::Large));
    EXPECT_TRUE(in_block(r, Measure::Errors, Block::LS));
    EXPECT_FALSE(in_block(r, Measure::Total, Block::SL));
    EXPECT_THROW(in_block(r, Measure::Total, Block::Large), ConfigError);
    EXPECT_EQ(parse_block("ss"), Block::SS);
    EXPECT_EQ(parse_block("overall"), Block::Overall);
    EXPECT_THROW(parse_block("middle"), ConfigError);
    EXPECT_EQ(parse_measure("button"), Measure::Button);
    EXPECT_THROW(parse_measure("speed"), ConfigError);
}

TEST_F(ReportTest, CrossoverAndTeleportDirections) {
    const auto large = block_analysis(records(), Measure::Thumbnail, Block::Large);
    const auto shrt = block_analysis(records(), Measure::Thumbnail, Block::Short);
    EXPECT_LT(large.cells[kGT].mean, large.cells[kCT].mean);
    EXPECT_LT(large.cells[kGS].mean, large.cells[kCS].mean);
    EXPECT_GT(shrt.cells[kGT].mean, shrt.cells[kCT].mean);
    EXPECT_GT(shrt.cells[kGS].mean, shrt.cells[kCS].mean);

    const auto button = block_analysis(records(), Measure::Button, Block::Overall);
    EXPECT_LT(button.cells[kGT].mean, button.cells[kGS].mean);
    EXPECT_LT(button.cells[kCT].mean, button.cells[kCS].mean);
    EXPECT_LT(button.anova[stats::Effect::B].p, 0.05);
}

TEST_F(ReportTest, ContrastsCarryRawScaleDifferences) {
    const auto rep = block_analysis(records(), Measure::Total, Block::LL);
    ASSERT_EQ(rep.contrasts.size(), 6u);
    for (const auto& c : rep.contrasts) {
        const auto i = static_cast<std::size_t>(condition_index(c.first));
        const auto j = static_cast<std::size_t>(condition_index(c.second));
        EXPECT_LT(i, j);
        EXPECT_NEAR(c.result.mean_difference, rep.cells[j].mean - rep.cells[i].mean, 1e-9);
        if (c.result.mean_difference != 0) {
            EXPECT_EQ(c.result.cohen_d > 0, c.result.mean_difference > 0);
        }
        EXPECT_GE(c.result.p, 0);
        EXPECT_LE(c.result.p, 1);
    }
}

TEST_F(ReportTest, MethodSelection) {
    StatsConfig forced;
    forced.shapiro_threshold = 1.0;
    EXPECT_TRUE(block_analysis(records(), Measure::Button, Block::Large, forced).used_art);

    StatsConfig off;
    off.use_art = false;
    const auto plain = block_analysis(records(), Measure::Button, Block::Large, off);
    EXPECT_FALSE(plain.used_art);
    const auto d = block_dataset(records(), Measure::Button, Block::Large);
    const auto direct = stats::anova_two_way(d);
    for (auto e : stats::kEffects) EXPECT_DOUBLE_EQ(plain.anova[e].f, direct[e].f);

    StatsConfig never;
    never.shapiro_threshold = 0.0;
    EXPECT_FALSE(block_analysis(records(), Measure::Button, Block::Large, never).used_art);

    const auto art = block_analysis(records(), Measure::Button, Block::Large, forced);
    const auto direct_art = stats::art_anova(d).table;
    for (auto e : stats::kEffects) EXPECT_DOUBLE_EQ(art.anova[e].f, direct_art[e].f);

    StatsConfig bad;
    bad.alpha = 1.5;
    EXPECT_THROW(block_analysis(records(), Measure::Button, Block::Large, bad), ConfigError);
}

TEST_F(ReportTest, EmptyBlockThrows) {
    std::vector<TrialRecord> leading;
    for (const auto& r : records())
        if (!r.recorded()) leading.push_back(r);
    EXPECT_THROW(block_analysis(leading, Measure::Thumbnail, Block::Overall), stats::StatsError);
    EXPECT_THROW(block_analysis({}, Measure::Errors, Block::SS), stats::StatsError);
}

// With condition labels shuffled across the block, each effect should come
// out non-significant at about the nominal rate. 1000 shuffles keep the
// binomial spread of the 90% floor small.
TEST_F(ReportTest, ShuffledLabelsRarelySignificant) {
    const auto base = block_dataset(records(), Measure::Total, Block::Overall);
    std::mt19937_64 rng(2024);
    std::array<int, 3> quiet{};
    for (int rep = 0; rep < 1000; ++rep) {
        auto d = base;
        std::vector<double> values;
        for (const auto& o : d) values.push_back(o.value);
        std::shuffle(values.begin(), values.end(), rng);
        for (std::size_t i = 0; i < d.size(); ++i) d[i].value = values[i];
        const auto t = stats::art_anova(d).table;
        for (std::size_t e = 0; e < 3; ++e) quiet[e] += t.effects[e].p > 0.05;
    }
    for (int q : quiet) EXPECT_GE(q, 900);
}

TEST_F(ReportTest, CsvAndTextRendering) {
    std::vector<BlockReport> reps;
    for (auto b : default_blocks(Measure::Thumbnail)) reps.push_back(block_analysis(records(), Measure::Thumbnail, b));
    const auto effects = effects_csv(reps);
    EXPECT_EQ(effects.substr(0, effects.find('\n')), kEffectsCsvHeader);
    EXPECT_EQ(std::count(effects.begin(), effects.end(), '\n'), 1 + 3 * 3);
    const auto cells = cells_csv(reps);
    EXPECT_EQ(std::count(cells.begin(), cells.end(), '\n'), 1 + 3 * 4);
    const auto contrasts = contrasts_csv(reps);
    EXPECT_EQ(std::count(contrasts.begin(), contrasts.end(), '\n'), 1 + 3 * 6);

    const auto text = text_report(reps);
    EXPECT_NE(text.find("Thumbnail time (ms)"), std::string::npos);
    EXPECT_NE(text.find("Selection Mode"), std::string::npos);
    EXPECT_NE(text.find("Interaction Effect"), std::string::npos);
    for (auto b : {"Overall", "Large", "Short"}) EXPECT_NE(text.find(b), std::string::npos);

    // A non-significant effect renders as ---.
    auto quiet = reps;
    quiet[0].anova.effects[0].p = 0.5;
    EXPECT_NE(text_report(quiet).find("---"), std::string::npos);
    EXPECT_TRUE(text_report({}).empty());
}

TEST(EffectSize, Labels) {
    EXPECT_EQ(effect_size_label(0.005), "vs");
    EXPECT_EQ(effect_size_label(0.01), "s");
    EXPECT_EQ(effect_size_label(0.059), "s");
    EXPECT_EQ(effect_size_label(0.06), "m");
    EXPECT_EQ(effect_size_label(0.14), "l");
    EXPECT_EQ(format_p(0.0004), "<0.001");
    EXPECT_EQ(format_p(0.0456), "0.046");
}

}  // namespace
}  // namespace vwm
