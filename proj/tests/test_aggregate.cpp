#include <algorithm>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "regseg/aggregate.hpp"

namespace {

using namespace regseg;
using fixtures::business_days;
using fixtures::ymd;

SegmentForest forest_with_stds(const std::vector<double>& stds, std::size_t seg_len) {
    SegmentForest f;
    for (std::size_t j = 0; j < stds.size(); ++j) {
        f.segments.push_back(Segment{j * seg_len, (j + 1) * seg_len, {0.0, stds[j] * stds[j]}, {}, 0});
    }
    f.series_len = stds.size() * seg_len;
    return f;
}

std::vector<int> quintiles(const std::vector<LabeledSegment>& labeled) {
    std::vector<int> q;
    for (const auto& l : labeled) q.push_back(l.quintile);
    return q;
}

TEST(QuintileOfRank, MidpointRuleTable) {
    EXPECT_EQ(quintile_of_rank(1, 1), 3);
    std::vector<int> nine;
    for (std::size_t r = 1; r <= 9; ++r) nine.push_back(quintile_of_rank(r, 9));
    EXPECT_EQ(nine, (std::vector<int>{1, 1, 2, 2, 3, 4, 4, 5, 5}));
    std::vector<int> two{quintile_of_rank(1, 2), quintile_of_rank(2, 2)};
    EXPECT_EQ(two, (std::vector<int>{2, 4}));
}

TEST(QuintileOfRank, MatchesFloatingPointDefinition) {
    for (std::size_t m = 1; m <= 60; ++m) {
        for (std::size_t r = 1; r <= m; ++r) {
            const double x = 5.0 * (static_cast<double>(r) - 0.5) / static_cast<double>(m);
            EXPECT_EQ(quintile_of_rank(r, m), static_cast<int>(std::ceil(x - 1e-12))) << r << "/" << m;
            EXPECT_EQ(quintile_of_rank(r, m, QuintileRule::Ceil),
                      static_cast<int>(std::ceil(5.0 * static_cast<double>(r) / static_cast<double>(m) - 1e-12)));
        }
    }
    EXPECT_EQ(quintile_of_rank(1, 1, QuintileRule::Ceil), 5);
    EXPECT_THROW(quintile_of_rank(0, 3), DomainError);
    EXPECT_THROW(quintile_of_rank(4, 3), DomainError);
}

TEST(QuintileLabel, FiveDistinctStds) {
    const auto labeled = quintile_label(forest_with_stds({0.3, 0.1, 0.5, 0.2, 0.4}, 10), "x");
    EXPECT_EQ(quintiles(labeled), (std::vector<int>{3, 1, 5, 2, 4}));
    for (const auto& l : labeled) EXPECT_EQ(l.quintile, static_cast<int>(l.rank));
}

TEST(QuintileLabel, SingleSegmentIsNeutral) {
    const auto labeled = quintile_label(forest_with_stds({0.7}, 10), "x");
    ASSERT_EQ(labeled.size(), 1u);
    EXPECT_EQ(labeled[0].rank, 1u);
    EXPECT_EQ(labeled[0].quintile, 3);
}

TEST(QuintileLabel, NineSegments) {
    const auto labeled = quintile_label(forest_with_stds({9, 8, 7, 6, 5, 4, 3, 2, 1}, 10), "toyota");
    EXPECT_EQ(quintiles(labeled), (std::vector<int>{5, 5, 4, 4, 3, 2, 2, 1, 1}));
}

TEST(QuintileLabel, TiesRankEarlierSegmentLower) {
    const auto labeled = quintile_label(forest_with_stds({0.2, 0.2, 0.1}, 10), "x");
    EXPECT_EQ(labeled[0].rank, 2u);
    EXPECT_EQ(labeled[1].rank, 3u);
    EXPECT_EQ(labeled[2].rank, 1u);
}

TEST(QuintileLabel, RanksArePermutationAndQuintilesMonotone) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> sd(0.01, 5.0);
    for (int rep = 0; rep < 300; ++rep) {
        std::vector<double> stds(1 + rng() % 30);
        for (auto& s : stds) s = sd(rng);
        const auto labeled = quintile_label(forest_with_stds(stds, 5), "x", rep % 2 ? QuintileRule::Ceil : QuintileRule::Midpoint);
        std::vector<std::size_t> ranks;
        for (const auto& l : labeled) ranks.push_back(l.rank);
        std::sort(ranks.begin(), ranks.end());
        for (std::size_t i = 0; i < ranks.size(); ++i) EXPECT_EQ(ranks[i], i + 1);
        auto by_rank = labeled;
        std::sort(by_rank.begin(), by_rank.end(), [](const auto& a, const auto& b) { return a.rank < b.rank; });
        for (std::size_t i = 1; i < by_rank.size(); ++i) EXPECT_LE(by_rank[i - 1].quintile, by_rank[i].quintile);
    }
}

TEST(DailyCounts, SingleSeriesSingleSegment) {
    const auto cal = business_days(ymd(2000, 1, 4), 10);
    const auto labeled = quintile_label(forest_with_stds({1.0}, 10), "x");
    const auto panel = daily_counts({labeled}, cal);
    EXPECT_EQ(panel.counts[2], std::vector<int>(10, 1));
    for (int k : {0, 1, 3, 4}) EXPECT_EQ(panel.counts[k], std::vector<int>(10, 0));
    std::vector<int> starts(10, 0);
    starts[0] = 1;
    EXPECT_EQ(panel.start_counts, starts);
}

TEST(DailyCounts, TwoSeriesFiveSegmentsConserve) {
    const auto cal = business_days(ymd(2000, 1, 4), 50);
    const auto a = quintile_label(forest_with_stds({1, 2, 3, 4, 5}, 10), "a");
    const auto b = quintile_label(forest_with_stds({5, 4, 3, 2, 1}, 10), "b");
    const auto panel = daily_counts({a, b}, cal);
    for (std::size_t d = 0; d < 50; ++d) {
        EXPECT_EQ(panel.total(d), 2);
        EXPECT_EQ(panel.start_counts[d], d % 10 == 0 ? 2 : 0);
    }
    EXPECT_EQ(panel.counts[0][0], 1);
    EXPECT_EQ(panel.counts[4][0], 1);
}

TEST(DailyCounts, GapIsAConsistencyError) {
    const auto cal = business_days(ymd(2000, 1, 4), 30);
    auto labeled = quintile_label(forest_with_stds({1, 2, 3}, 10), "gappy");
    labeled.erase(labeled.begin() + 1);
    try {
        daily_counts({labeled}, cal);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("gappy"), std::string::npos);
    }
    const auto short_series = quintile_label(forest_with_stds({1, 2}, 10), "short");
    EXPECT_THROW(daily_counts({short_series}, cal), ValidationError);
}

TEST(DailyCounts, CommonBreakProducesStartSpike) {
    const auto panel = fixtures::common_break_panel(50, 600, 300, 17);
    const auto analysis = analyze_panel(panel, SegmentationConfig{});
    const auto& starts = analysis.quintiles.start_counts;
    int near = 0, elsewhere = 0;
    for (std::size_t d = 1; d < starts.size(); ++d) {
        if (d >= 280 && d <= 320) near += starts[d];
        else elsewhere += starts[d];
    }
    EXPECT_GE(near, 45);
    EXPECT_LT(elsewhere, near / 4);
    EXPECT_EQ(starts[0], 50);
    for (std::size_t d = 0; d < analysis.quintiles.days(); ++d) EXPECT_EQ(analysis.quintiles.total(d), 50);
    // after the break every two-segment series is in its higher class
    EXPECT_GE(analysis.quintiles.counts[3][500], 45);
}

TEST(DailyCounts, PermutationInvariant) {
    const auto panel = fixtures::common_break_panel(12, 300, 150, 3);
    auto analysis = analyze_panel(panel, SegmentationConfig::from_delta_c(3.0));
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 10; ++rep) {
        auto labeled = analysis.labeled;
        std::shuffle(labeled.begin(), labeled.end(), rng);
        const auto p = daily_counts(labeled, panel.calendar);
        EXPECT_EQ(p.counts, analysis.quintiles.counts);
        EXPECT_EQ(p.start_counts, analysis.quintiles.start_counts);
    }
}

TEST(AnalyzePanel, ScalingOneSeriesKeepsItsLabels) {
    auto panel = fixtures::common_break_panel(6, 400, 200, 21);
    const auto before = analyze_panel(panel, SegmentationConfig::from_delta_c(4.0));
    for (auto& r : panel.series[2].returns) r *= 7.5;
    const auto after = analyze_panel(panel, SegmentationConfig::from_delta_c(4.0));
    ASSERT_EQ(before.labeled[2].size(), after.labeled[2].size());
    for (std::size_t j = 0; j < before.labeled[2].size(); ++j) {
        EXPECT_EQ(before.labeled[2][j].segment.start, after.labeled[2][j].segment.start);
        EXPECT_EQ(before.labeled[2][j].rank, after.labeled[2][j].rank);
        EXPECT_EQ(before.labeled[2][j].quintile, after.labeled[2][j].quintile);
    }
}

TEST(AnalyzePanel, ParallelMatchesSerial) {
    const auto panel = fixtures::robustness_panel(20, 5);
    const auto serial = analyze_panel(panel, SegmentationConfig{}, QuintileRule::Midpoint, 1);
    const auto parallel = analyze_panel(panel, SegmentationConfig{}, QuintileRule::Midpoint, 4);
    EXPECT_EQ(serial.forests, parallel.forests);
    EXPECT_EQ(serial.quintiles.counts, parallel.quintiles.counts);
}

QuintilePanel toy_panel() {
    const auto cal = business_days(ymd(2000, 1, 4), 20);
    const auto a = quintile_label(forest_with_stds({1, 2}, 10), "a");
    const auto b = quintile_label(forest_with_stds({3, 1, 2, 4}, 5), "b");
    return daily_counts({a, b}, cal);
}

TEST(CompareWindows, SelfComparison) {
    const auto p = toy_panel();
    const auto r = compare_windows(p, p);
    EXPECT_EQ(r.shared_days, 20u);
    EXPECT_EQ(r.max_l1, 0);
    EXPECT_EQ(r.mean_l1, 0.0);
    EXPECT_EQ(r.equal_fraction, 1.0);
}

TEST(CompareWindows, SingleRelabel) {
    const auto p = toy_panel();
    auto q = p;
    q.counts[1][7] -= 1;
    q.counts[4][7] += 1;
    const auto r = compare_windows(p, q);
    EXPECT_EQ(r.max_l1, 2);
    EXPECT_EQ(r.per_day_l1[7], 2);
    EXPECT_DOUBLE_EQ(r.equal_fraction, 19.0 / 20.0);
    EXPECT_DOUBLE_EQ(r.mean_l1, 0.1);
    EXPECT_DOUBLE_EQ(r.equal_fraction_before(7), 1.0);
}

TEST(CompareWindows, PrefixRequirement) {
    const auto p = toy_panel();
    auto prefix = p;
    prefix.calendar.resize(12);
    for (auto& row : prefix.counts) row.resize(12);
    prefix.start_counts.resize(12);
    EXPECT_EQ(compare_windows(p, prefix).shared_days, 12u);
    EXPECT_THROW(compare_windows(prefix, p), ValidationError);
    auto shifted = prefix;
    shifted.calendar[0] = ymd(1999, 12, 31);
    EXPECT_THROW(compare_windows(p, shifted), ValidationError);
}

TEST(TruncatePanel, KeepsDaysUpToDate) {
    const auto panel = fixtures::common_break_panel(3, 100, 50, 1);
    const auto t = truncate_panel(panel, panel.calendar[39]);
    EXPECT_EQ(t.calendar.size(), 40u);
    EXPECT_EQ(t.series[1].returns.size(), 40u);
    EXPECT_EQ(t.series[1].returns[39], panel.series[1].returns[39]);
    EXPECT_THROW(truncate_panel(panel, ymd(1990, 1, 1)), ValidationError);
}

TEST(Monthly, BinsByCalendarMonth) {
    const auto p = toy_panel(); // 2000-01-04 .. 2000-01-31 (20 business days)
    const auto rows = monthly(p);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].days, 20u);
    int starts = 0;
    for (int s : p.start_counts) starts += s;
    EXPECT_EQ(rows[0].starts, starts);
    double total = 0;
    for (double c : rows[0].mean_counts) total += c;
    EXPECT_NEAR(total, 2.0, 1e-12);

    const auto panel = fixtures::common_break_panel(2, 60, 30, 1);
    const auto analysis = analyze_panel(panel, SegmentationConfig{});
    EXPECT_EQ(monthly(analysis.quintiles).size(), 3u);
}

} // namespace
