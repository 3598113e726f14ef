#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "vwm/experiment.hpp"

namespace vwm {
namespace {

std::array<int, 4> pair_histogram(const std::vector<Ring>& rings) {
    std::array<int, 4> h{};
    for (std::size_t i = 1; i < rings.size(); ++i) ++h[static_cast<std::size_t>(make_pair(rings[i - 1], rings[i]))];
    return h;
}

TEST(LatinSquare, FourConditionRows) {
    const std::vector<std::vector<int>> want{{0, 1, 3, 2}, {1, 2, 0, 3}, {2, 3, 1, 0}, {3, 0, 2, 1}};  // ABDC BCAD CDBA DACB
    EXPECT_EQ(balanced_latin_square(4), want);
    EXPECT_EQ(balanced_latin_square(2), (std::vector<std::vector<int>>{{0, 1}, {1, 0}}));
}

TEST(LatinSquare, BalancePropertiesForEvenN) {
    for (int n = 2; n <= 12; n += 2) {
        const auto sq = balanced_latin_square(n);
        std::set<std::pair<int, int>> adjacent;
        for (int i = 0; i < n; ++i) {
            std::set<int> row(sq[static_cast<std::size_t>(i)].begin(), sq[static_cast<std::size_t>(i)].end());
            EXPECT_EQ(row.size(), static_cast<std::size_t>(n));
            std::set<int> col;
            for (int j = 0; j < n; ++j) col.insert(sq[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]);
            EXPECT_EQ(col.size(), static_cast<std::size_t>(n));
            for (int j = 1; j < n; ++j)
                EXPECT_TRUE(adjacent.insert({sq[static_cast<std::size_t>(i)][static_cast<std::size_t>(j - 1)],
                                             sq[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]})
                                .second);
        }
        EXPECT_EQ(adjacent.size(), static_cast<std::size_t>(n * (n - 1)));
    }
}

TEST(LatinSquare, OddOrTinyNRejected) {
    EXPECT_THROW(balanced_latin_square(3), std::invalid_argument);
    EXPECT_THROW(balanced_latin_square(0), std::invalid_argument);
    try {
        balanced_latin_square(5);
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("2n"), std::string::npos);
    }
}

TEST(RingSequence, ExactQuotaForThousandSeeds) {
    std::set<std::vector<Ring>> distinct;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto rings = generate_ring_sequence(seed);
        ASSERT_EQ(rings.size(), 53u);
        EXPECT_EQ(pair_histogram(rings), (std::array<int, 4>{13, 13, 13, 13})) << "seed " << seed;
        EXPECT_EQ(rings.front(), rings.back());
        distinct.insert(rings);
    }
    EXPECT_GT(distinct.size(), 900u);
    EXPECT_EQ(generate_ring_sequence(5), generate_ring_sequence(5));
}

TEST(RingSequence, BothStartRingsOccur) {
    int large = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) large += generate_ring_sequence(seed).front() == Ring::Large;
    EXPECT_GT(large, 60);
    EXPECT_LT(large, 140);
}

class SessionTest : public ::testing::Test {
protected:
    const CylinderDisplay display;
    const SceneConfig scene;
    const SceneLayout layout = build_layout(display, scene, 31);
};

TEST_F(SessionTest, PlanShapeAndQuota) {
    const auto plan = build_session(3, 2, 1234, layout, scene);
    const auto square = balanced_latin_square(4);
    int total = 0, recorded = 0;
    for (std::size_t pos = 0; pos < 4; ++pos) {
        EXPECT_EQ(condition_index(plan.order[pos]), square[2][pos]);
        const auto& trials = plan.trials[pos];
        ASSERT_EQ(trials.size(), 60u);
        EXPECT_EQ(trials[0].target_window, kRedOne);
        std::array<int, 4> hist{};
        int training = 0, discarded = 0;
        for (std::size_t i = 0; i < trials.size(); ++i) {
            const auto& t = trials[i];
            EXPECT_EQ(t.index, static_cast<int>(i));
            EXPECT_NE(t.start_window, t.target_window);
            EXPECT_EQ(t.pair, make_pair(layout.ring(t.start_window), layout.ring(t.target_window)));
            if (i > 0) {
                EXPECT_EQ(t.start_window, trials[i - 1].target_window);
            }
            EXPECT_NEAR(distance_px(t.button_center, layout.window(t.target_window).center), 300, 1e-9);
            training += t.training;
            discarded += t.discarded;
            if (t.recorded()) ++hist[static_cast<std::size_t>(t.pair)];
            ++total;
            recorded += t.recorded();
        }
        EXPECT_EQ(training, 5);
        EXPECT_EQ(discarded, 3);
        for (int i = 0; i < 8; ++i) EXPECT_FALSE(trials[static_cast<std::size_t>(i)].recorded());
        EXPECT_EQ(hist, (std::array<int, 4>{13, 13, 13, 13}));
    }
    EXPECT_EQ(total, 240);
    EXPECT_EQ(recorded, 208);
}

TEST_F(SessionTest, InvalidRowRejected) {
    EXPECT_THROW(build_session(0, 4, 1, layout, scene), std::invalid_argument);
}

TEST_F(SessionTest, TargetsUniformWithinRing) {
    std::map<int, int> counts;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto plan = build_session(0, 0, seed, layout, scene);
        for (const auto& trials : plan.trials)
            for (const auto& t : trials)
                if (t.recorded()) ++counts[t.target_window];
    }
    ASSERT_EQ(counts.size(), 20u);
    // 200 * 208 targets spread over 20 windows; each ring receives half.
    for (const auto& [id, n] : counts) {
        EXPECT_GT(n, 2080 * 0.85) << window_name(id);
        EXPECT_LT(n, 2080 * 1.15) << window_name(id);
    }
}

TEST_F(SessionTest, PlanManifestMatchesGolden) {
    const auto plan = build_session(0, 0, participant_seed(42, 0), layout, scene);
    std::ifstream in(std::string(VWM_SOURCE_DIR) + "/tests/golden/plan_layout31_p0.txt");
    ASSERT_TRUE(in) << "golden file missing";
    std::stringstream golden;
    golden << in.rdbuf();
    EXPECT_EQ(dump_plan(plan), golden.str());
}

TEST(Study, RunSessionRecordsReplayExactly) {
    StudyConfig cfg;
    const auto bar = make_bar_for(cfg, layout_seed_for(participant_seed(cfg.seed, 1)));
    const auto plan = plan_for(cfg, 1, bar.layout());
    const auto result = run_session(plan, bar, cfg.agents);
    ASSERT_EQ(result.records.size(), 240u);
    EXPECT_EQ(recorded_only(result.records).size(), 208u);
    std::vector<TrialRecord> replayed;
    for (const auto& log : result.logs) {
        ASSERT_EQ(log.trials.size(), 60u);
        const auto r = replay(log, bar);
        replayed.insert(replayed.end(), r.begin(), r.end());
    }
    EXPECT_EQ(replayed, result.records);
    for (const auto& r : result.records) {
        EXPECT_EQ(r.total_ms, r.thumbnail_ms + r.button_ms);
        EXPECT_GT(r.thumbnail_ms, 0);
        EXPECT_GE(r.button_ms, 0);
    }
}

TEST(Study, RunSessionRejectsForeignLayout) {
    StudyConfig cfg;
    const auto bar = make_bar_for(cfg, 1);
    auto plan = plan_for(cfg, 0, bar.layout());
    plan.layout_seed = 2;
    EXPECT_THROW(run_session(plan, bar, cfg.agents), SessionError);
}

TEST(Study, SixteenParticipantsDeterministic) {
    StudyConfig cfg;
    const auto a = simulate_study(cfg);
    ASSERT_EQ(a.size(), 16u);
    EXPECT_EQ(recorded_only(all_records(a)).size(), 16u * 208u);
    for (int p = 0; p < 16; ++p) EXPECT_EQ(a[static_cast<std::size_t>(p)].plan.square_row, p % 4);
    const auto b = simulate_study(cfg);
    EXPECT_EQ(to_csv(all_records(a)), to_csv(all_records(b)));
    cfg.seed = 43;
    EXPECT_NE(to_csv(all_records(simulate_study(cfg))), to_csv(all_records(a)));
}

TEST(Study, NoiseFreeGazeHasNoErrors) {
    StudyConfig cfg;
    cfg.participants = 4;
    cfg.agents.gaze.tracking_noise_deg = 0;
    for (const auto& r : all_records(simulate_study(cfg))) {
        if (r.condition.selection == Selection::Gaze) {
            EXPECT_EQ(r.errors, 0);
        }
    }
}

TEST(Study, TruncatedConditions) {
    StudyConfig cfg;
    cfg.participants = 2;
    cfg.trials_per_condition = 2;
    const auto records = all_records(simulate_study(cfg));
    EXPECT_EQ(records.size(), 2u * 4u * 2u);
    EXPECT_TRUE(recorded_only(records).empty());
    cfg.participants = 0;
    EXPECT_THROW(simulate_study(cfg), ConfigError);
}

TEST(TrialRecordCsv, RoundTripAndValidation) {
    TrialRecord r{7, kConditions[1], 12, DistancePair::SL, 1234.5678, 765.4321, 0, 2, 1, false, false};
    r.total_ms = r.thumbnail_ms + r.button_ms;
    EXPECT_EQ(parse_csv_row(to_csv_row(r)), r);
    const auto csv = to_csv({r});
    EXPECT_EQ(csv.substr(0, csv.find('\n')), kRecordCsvHeader);
    EXPECT_THROW(parse_csv_row("1,gaze-stay,3,LL,1,2,4,0,0,0,0"), ConfigError);  // total mismatch
    EXPECT_THROW(parse_csv_row("1,gaze-stay,3,LX,1,2,3,0,0,0,0"), ConfigError);
    EXPECT_THROW(parse_csv_row("1,gaze-stay,3,LL,1,2,3,0,0,0"), ConfigError);
    EXPECT_THROW(parse_csv_row("1,gaze-stay,3,LL,1,2,3,-1,0,0,0"), ConfigError);
}

}  // namespace
}  // namespace vwm
