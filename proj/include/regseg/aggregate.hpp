#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "regseg/error.hpp"
#include "regseg/ingest.hpp"
#include "regseg/parallel.hpp"
#include "regseg/segmentation.hpp"

namespace regseg {

inline constexpr int kQuintiles = 5;

enum class QuintileRule {
    Midpoint, // ceil(5 * (rank - 1/2) / m)
    Ceil,     // ceil(5 * rank / m)
};

inline const char* to_string(QuintileRule r) { return r == QuintileRule::Midpoint ? "midpoint" : "ceil"; }

// Quintile class 1..5 of the rank-th smallest (1-based) of m values.
inline int quintile_of_rank(std::size_t rank, std::size_t m, QuintileRule rule = QuintileRule::Midpoint) {
    if (m == 0 || rank < 1 || rank > m) throw DomainError("quintile_of_rank: rank must lie in [1, m]");
    if (rule == QuintileRule::Midpoint) {
        return static_cast<int>((10 * rank - 5 + 2 * m - 1) / (2 * m));
    }
    return static_cast<int>((5 * rank + m - 1) / m);
}

struct LabeledSegment {
    std::string series_id;
    Segment segment;
    std::size_t rank = 0; // 1-based rank of the segment's std within its series
    int quintile = 0;
};

// Labels every segment of one series by the order statistics of its
// segments' standard deviations. Ties rank the earlier segment lower.
// Output keeps the forest's index order.
inline std::vector<LabeledSegment> quintile_label(const SegmentForest& forest, const std::string& series_id,
                                                  QuintileRule rule = QuintileRule::Midpoint) {
    const auto& segs = forest.segments;
    if (segs.empty()) throw DomainError("quintile_label: forest has no segments");
    std::vector<std::size_t> order(segs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double sa = segs[a].params.stddev();
        const double sb = segs[b].params.stddev();
        if (sa != sb) return sa < sb;
        return segs[a].start < segs[b].start;
    });
    std::vector<LabeledSegment> out(segs.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        const std::size_t j = order[r];
        out[j] = LabeledSegment{series_id, segs[j], r + 1, quintile_of_rank(r + 1, segs.size(), rule)};
    }
    return out;
}

struct QuintilePanel {
    std::vector<Date> calendar;
    std::array<std::vector<int>, kQuintiles> counts; // counts[k - 1][day]
    std::vector<int> start_counts;

    std::size_t days() const { return calendar.size(); }

    int total(std::size_t day) const {
        int s = 0;
        for (const auto& row : counts) s += row[day];
        return s;
    }
};

// Per day and quintile, the number of series whose covering segment carries
// that label; start_counts[d] counts segments beginning on day d.
inline QuintilePanel daily_counts(const std::vector<std::vector<LabeledSegment>>& labeled,
                                  const std::vector<Date>& calendar) {
    const std::size_t n = calendar.size();
    QuintilePanel panel;
    panel.calendar = calendar;
    std::array<std::vector<int>, kQuintiles> diff;
    for (auto& d : diff) d.assign(n + 1, 0);
    panel.start_counts.assign(n, 0);

    for (const auto& series : labeled) {
        const std::string id = series.empty() ? std::string("<unnamed>") : series.front().series_id;
        std::vector<const LabeledSegment*> segs;
        for (const auto& s : series) segs.push_back(&s);
        std::sort(segs.begin(), segs.end(),
                  [](const auto* a, const auto* b) { return a->segment.start < b->segment.start; });
        std::size_t covered = 0;
        for (const auto* s : segs) {
            const auto& seg = s->segment;
            if (seg.start != covered) {
                const std::size_t day = std::min(covered, n == 0 ? 0 : n - 1);
                throw ValidationError("series " + id + ": segments do not tile the calendar near day " +
                                      std::to_string(covered) +
                                      (day < n ? " (" + format_date(calendar[day]) + ")" : std::string()));
            }
            if (seg.end > n || seg.end <= seg.start) {
                throw ValidationError("series " + id + ": segment [" + std::to_string(seg.start) + ", " +
                                      std::to_string(seg.end) + ") outside calendar of " + std::to_string(n) +
                                      " days");
            }
            if (s->quintile < 1 || s->quintile > kQuintiles) {
                throw ValidationError("series " + id + ": quintile label out of range");
            }
            diff[s->quintile - 1][seg.start] += 1;
            diff[s->quintile - 1][seg.end] -= 1;
            panel.start_counts[seg.start] += 1;
            covered = seg.end;
        }
        if (covered != n) {
            throw ValidationError("series " + id + ": day " + std::to_string(covered) + " (" +
                                  format_date(calendar[covered]) + ") is covered by no segment");
        }
    }
    for (int k = 0; k < kQuintiles; ++k) {
        panel.counts[k].assign(n, 0);
        int running = 0;
        for (std::size_t d = 0; d < n; ++d) {
            running += diff[k][d];
            panel.counts[k][d] = running;
        }
    }
    return panel;
}

struct WindowAgreement {
    std::size_t shared_days = 0;
    std::vector<int> per_day_l1;
    double mean_l1 = 0.0;
    int max_l1 = 0;
    double equal_fraction = 1.0;

    // Fraction of days [0, end) with identical count vectors.
    double equal_fraction_before(std::size_t end) const {
        end = std::min(end, per_day_l1.size());
        if (end == 0) return 1.0;
        const auto equal = std::count(per_day_l1.begin(), per_day_l1.begin() + static_cast<std::ptrdiff_t>(end), 0);
        return static_cast<double>(equal) / static_cast<double>(end);
    }
};

// Compares a run over a truncated calendar with the full run on the shared prefix.
inline WindowAgreement compare_windows(const QuintilePanel& full, const QuintilePanel& truncated) {
    const std::size_t n = truncated.days();
    if (n > full.days() || !std::equal(truncated.calendar.begin(), truncated.calendar.end(), full.calendar.begin())) {
        throw ValidationError("compare_windows: truncated calendar is not a prefix of the full calendar");
    }
    WindowAgreement report;
    report.shared_days = n;
    report.per_day_l1.assign(n, 0);
    std::size_t equal = 0;
    long long sum = 0;
    for (std::size_t d = 0; d < n; ++d) {
        int l1 = 0;
        for (int k = 0; k < kQuintiles; ++k) l1 += std::abs(full.counts[k][d] - truncated.counts[k][d]);
        report.per_day_l1[d] = l1;
        sum += l1;
        report.max_l1 = std::max(report.max_l1, l1);
        if (l1 == 0) ++equal;
    }
    if (n > 0) {
        report.mean_l1 = static_cast<double>(sum) / static_cast<double>(n);
        report.equal_fraction = static_cast<double>(equal) / static_cast<double>(n);
    }
    return report;
}

struct MonthlyRow {
    std::chrono::year_month month;
    std::size_t days = 0;
    std::array<double, kQuintiles> mean_counts{};
    int starts = 0;
};

// Calendar-month binning: mean daily quintile counts and summed segment starts.
inline std::vector<MonthlyRow> monthly(const QuintilePanel& panel) {
    std::vector<MonthlyRow> rows;
    for (std::size_t d = 0; d < panel.days(); ++d) {
        const std::chrono::year_month ym{panel.calendar[d].year(), panel.calendar[d].month()};
        if (rows.empty() || rows.back().month != ym) rows.push_back(MonthlyRow{ym, 0, {}, 0});
        auto& row = rows.back();
        ++row.days;
        for (int k = 0; k < kQuintiles; ++k) row.mean_counts[k] += panel.counts[k][d];
        row.starts += panel.start_counts[d];
    }
    for (auto& row : rows) {
        for (auto& c : row.mean_counts) c /= static_cast<double>(row.days);
    }
    return rows;
}

struct PanelAnalysis {
    std::vector<SegmentForest> forests; // aligned with panel.series
    std::vector<std::vector<LabeledSegment>> labeled;
    QuintilePanel quintiles;
};

// Segments every series of an aligned panel (in parallel), labels, and counts.
inline PanelAnalysis analyze_panel(const Panel& panel, const SegmentationConfig& config,
                                   QuintileRule rule = QuintileRule::Midpoint, unsigned jobs = default_jobs()) {
    PanelAnalysis out;
    const std::size_t m = panel.series.size();
    out.forests.resize(m);
    out.labeled.resize(m);
    parallel_for(m, jobs, [&](std::size_t i) {
        const auto& s = panel.series[i];
        out.forests[i] = recursive_segment(s.returns, config);
        out.labeled[i] = quintile_label(out.forests[i], s.series_id, rule);
    });
    out.quintiles = daily_counts(out.labeled, panel.calendar);
    return out;
}

// Restricts a panel to calendar days on or before `last`.
inline Panel truncate_panel(const Panel& panel, Date last) {
    const auto end = static_cast<std::size_t>(
        std::upper_bound(panel.calendar.begin(), panel.calendar.end(), last) - panel.calendar.begin());
    if (end == 0) throw ValidationError("truncation date " + format_date(last) + " precedes the calendar");
    Panel out;
    out.calendar.assign(panel.calendar.begin(), panel.calendar.begin() + static_cast<std::ptrdiff_t>(end));
    for (const auto& s : panel.series) {
        ReturnSeries t{s.series_id, out.calendar,
                       std::vector<double>(s.returns.begin(), s.returns.begin() + static_cast<std::ptrdiff_t>(end))};
        out.series.push_back(std::move(t));
    }
    return out;
}

} // namespace regseg
