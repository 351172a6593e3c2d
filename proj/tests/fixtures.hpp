#pragma once

// Synthetic panels shared by the unit, CLI and acceptance suites.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "regseg/ingest.hpp"
#include "regseg/synthetic.hpp"

namespace regseg::fixtures {

inline Date ymd(int y, unsigned m, unsigned d) {
    return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
}

// Monday-to-Friday calendar starting at `first`.
inline std::vector<Date> business_days(Date first, std::size_t n) {
    std::vector<Date> out;
    std::chrono::sys_days d{first};
    while (out.size() < n) {
        const std::chrono::weekday wd{d};
        if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) out.emplace_back(d);
        d += std::chrono::days{1};
    }
    return out;
}

struct Regime {
    std::size_t start;
    double scale; // multiplies the series' base volatility
};

// One series per entry of `regimes`; each regime list must start at day 0.
inline Panel make_panel(const std::vector<std::vector<Regime>>& regimes, std::size_t n_days, std::uint64_t seed,
                        Date first = ymd(2000, 1, 4)) {
    Panel panel;
    panel.calendar = business_days(first, n_days);
    SplitMix64 seeds(seed);
    for (std::size_t i = 0; i < regimes.size(); ++i) {
        PiecewiseSpec spec;
        spec.seed = seeds();
        const double base = 0.01 + 0.0005 * static_cast<double>(i % 20);
        const auto& rs = regimes[i];
        for (std::size_t j = 0; j < rs.size(); ++j) {
            const std::size_t end = j + 1 < rs.size() ? rs[j + 1].start : n_days;
            spec.pieces.push_back(Piece{end - rs[j].start, 0.0, base * rs[j].scale});
        }
        char id[16];
        std::snprintf(id, sizeof id, "S%03zu", i);
        panel.series.push_back(ReturnSeries{id, panel.calendar, generate(spec)});
    }
    return panel;
}

// n_series series whose volatility triples from break_day onward.
inline Panel common_break_panel(std::size_t n_series, std::size_t n_days, std::size_t break_day, std::uint64_t seed) {
    return make_panel(std::vector<std::vector<Regime>>(n_series, {{0, 1.0}, {break_day, 3.0}}), n_days, seed);
}

// 1200-day panel: a shared turbulent episode on days [300, 420), a calmer
// aftermath, then one series-specific level shift in [550, 700) that persists
// to the end. Regime volatilities within a series are all distinct.
inline Panel robustness_panel(std::size_t n_series, std::uint64_t seed) {
    std::vector<std::vector<Regime>> regimes;
    SplitMix64 rng(seed ^ 0x5eedULL);
    for (std::size_t i = 0; i < n_series; ++i) {
        const std::size_t shift_day = 550 + rng() % 150;
        const double late = (i % 2 == 0) ? 0.6 : 4.0;
        regimes.push_back({{0, 1.0}, {300, 3.0}, {420, 1.8}, {shift_day, late}});
    }
    return make_panel(regimes, 1200, seed);
}

// Price CSV whose open-to-close log-returns reproduce `series`.
inline std::string to_price_csv(const ReturnSeries& series) {
    std::vector<PriceRecord> recs;
    for (std::size_t i = 0; i < series.size(); ++i) {
        recs.push_back({series.dates[i], 100.0, 100.0 * std::exp(series.returns[i])});
    }
    return write_price_csv(recs);
}

} // namespace regseg::fixtures
