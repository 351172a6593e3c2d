#pragma once

// JSON and CSV encodings of the library's result types.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "regseg/aggregate.hpp"
#include "regseg/error.hpp"
#include "regseg/ingest.hpp"
#include "regseg/segmentation.hpp"
#include "regseg/stats.hpp"
#include "regseg/synthetic.hpp"

namespace regseg {

using json = nlohmann::json;

inline void to_json(json& j, const GaussianParams& p) { j = json{{"mean", p.mean}, {"variance", p.variance}}; }

inline void from_json(const json& j, GaussianParams& p) {
    p.mean = j.at("mean").get<double>();
    p.variance = j.at("variance").get<double>();
    if (!(p.variance >= 0.0)) throw ValidationError("GaussianParams: negative variance");
}

inline void to_json(json& j, const SegmentationConfig& c) {
    j = json{{"alpha", c.alpha()},
             {"delta_c", c.delta_c()},
             {"dof_k", c.dof_k()},
             {"min_seg_len", c.min_seg_len()},
             {"threshold_convention", to_string(c.convention())}};
}

inline ThresholdConvention parse_threshold_convention(std::string_view s) {
    if (s == "two-delta") return ThresholdConvention::TwoDelta;
    if (s == "paper-literal") return ThresholdConvention::PaperLiteral;
    throw ValidationError("unknown threshold convention '" + std::string(s) + "'");
}

inline SegmentationConfig config_from_json(const json& j) {
    return SegmentationConfig::from_delta_c(j.at("delta_c").get<double>(), j.at("dof_k").get<int>(),
                                            j.at("min_seg_len").get<std::size_t>(),
                                            parse_threshold_convention(j.at("threshold_convention").get<std::string>()));
}

inline void to_json(json& j, const Segment& s) {
    j = json{{"start", s.start},
             {"end", s.end},
             {"mean", s.params.mean},
             {"variance", s.params.variance},
             {"std", s.params.stddev()},
             {"max_delta", s.max_delta ? json(*s.max_delta) : json(nullptr)},
             {"depth", s.depth}};
}

inline void from_json(const json& j, Segment& s) {
    s.start = j.at("start").get<std::size_t>();
    s.end = j.at("end").get<std::size_t>();
    s.params = GaussianParams{j.at("mean").get<double>(), j.at("variance").get<double>()};
    s.max_delta = j.at("max_delta").is_null() ? std::nullopt : std::optional<double>(j.at("max_delta").get<double>());
    s.depth = j.at("depth").get<std::size_t>();
}

inline json forest_to_json(const SegmentForest& forest, const std::string& series_id = {},
                           const std::vector<Date>* calendar = nullptr) {
    json segs = json::array();
    for (const auto& s : forest.segments) {
        json js = s;
        if (calendar) {
            js["start_date"] = format_date((*calendar)[s.start]);
            js["end_date"] = format_date((*calendar)[s.end - 1]);
        }
        segs.push_back(std::move(js));
    }
    json j{{"series_len", forest.series_len}, {"config", forest.config}, {"segments", std::move(segs)}};
    if (!series_id.empty()) j["series_id"] = series_id;
    return j;
}

inline SegmentForest forest_from_json(const json& j) {
    SegmentForest forest;
    forest.series_len = j.at("series_len").get<std::size_t>();
    forest.config = config_from_json(j.at("config"));
    forest.segments = j.at("segments").get<std::vector<Segment>>();
    return forest;
}

inline constexpr std::string_view kSegmentCsvHeader = "series_id,start,end,start_date,end_date,mean,std,max_delta,depth";

// One row per segment. end is exclusive; end_date is the date of the last
// observation in the segment. Date columns are empty without a calendar.
inline std::string forest_to_csv(const SegmentForest& forest, const std::string& series_id,
                                 const std::vector<Date>* calendar = nullptr) {
    std::string out(kSegmentCsvHeader);
    out += '\n';
    for (const auto& s : forest.segments) {
        out += series_id + ',' + std::to_string(s.start) + ',' + std::to_string(s.end) + ',';
        if (calendar) out += format_date((*calendar)[s.start]) + ',' + format_date((*calendar)[s.end - 1]);
        else out += ',';
        out += ',' + format_double(s.params.mean) + ',' + format_double(s.params.stddev()) + ',';
        if (s.max_delta) out += format_double(*s.max_delta);
        out += ',' + std::to_string(s.depth) + '\n';
    }
    return out;
}

struct SegmentTable {
    std::string series_id;
    std::vector<Segment> segments;
};

// Reads the CSV written by forest_to_csv. Variances are rebuilt as std^2.
inline SegmentTable parse_segment_table(std::string_view text) {
    SegmentTable table;
    bool header = true;
    detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        if (header) {
            if (detail::trim(line) != kSegmentCsvHeader) throw ParseError("unexpected segment table header", line_no);
            header = false;
            return;
        }
        const auto f = detail::split_csv_line(line);
        if (f.size() != 9) throw ParseError("expected 9 fields", line_no);
        auto integer = [&](std::string_view s) {
            std::size_t v = 0;
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
                throw ParseError("bad integer '" + std::string(s) + "'", line_no);
            }
            return v;
        };
        auto real = [&](std::string_view s) {
            const auto v = parse_double(s);
            if (!v) throw ParseError("bad number '" + std::string(s) + "'", line_no);
            return *v;
        };
        if (table.segments.empty()) table.series_id = std::string(f[0]);
        else if (table.series_id != f[0]) throw ParseError("mixed series ids in one table", line_no);
        Segment s;
        s.start = integer(f[1]);
        s.end = integer(f[2]);
        const double sd = real(f[6]);
        s.params = GaussianParams{real(f[5]), sd * sd};
        if (!f[7].empty()) s.max_delta = real(f[7]);
        s.depth = integer(f[8]);
        table.segments.push_back(s);
    });
    if (header) throw ParseError("empty segment table", 1);
    return table;
}

inline json to_json_value(const RecoveryScore& s) {
    json matched = json::array();
    for (const auto& [t, f] : s.matched) matched.push_back({t, f});
    json segs = json::array();
    for (std::size_t i = 0; i < s.matched_segments.size(); ++i) {
        segs.push_back({{"true_piece", s.matched_segments[i].first},
                        {"found_segment", s.matched_segments[i].second},
                        {"std_rel_error", s.per_segment_param_error[i]}});
    }
    return json{{"true_boundaries", s.true_boundaries},
                {"found_boundaries", s.found_boundaries},
                {"matched", std::move(matched)},
                {"missed", s.missed},
                {"spurious", s.spurious},
                {"matched_segments", std::move(segs)},
                {"max_param_error", s.max_param_error()}};
}

inline std::string quintile_panel_to_csv(const QuintilePanel& panel) {
    std::string out = "date,q1,q2,q3,q4,q5,starts\n";
    for (std::size_t d = 0; d < panel.days(); ++d) {
        out += format_date(panel.calendar[d]);
        for (const auto& row : panel.counts) out += ',' + std::to_string(row[d]);
        out += ',' + std::to_string(panel.start_counts[d]) + '\n';
    }
    return out;
}

inline std::string monthly_to_csv(const std::vector<MonthlyRow>& rows) {
    std::string out = "month,days,q1_mean,q2_mean,q3_mean,q4_mean,q5_mean,starts\n";
    for (const auto& r : rows) {
        char month[16];
        std::snprintf(month, sizeof month, "%04d-%02u", static_cast<int>(r.month.year()),
                      static_cast<unsigned>(r.month.month()));
        out += std::string(month) + ',' + std::to_string(r.days);
        for (double c : r.mean_counts) out += ',' + format_double(c);
        out += ',' + std::to_string(r.starts) + '\n';
    }
    return out;
}

inline json to_json_value(const WindowAgreement& report, const std::vector<Date>& calendar) {
    json per_day = json::array();
    for (std::size_t d = 0; d < report.per_day_l1.size(); ++d) {
        per_day.push_back({{"date", format_date(calendar[d])}, {"l1", report.per_day_l1[d]}});
    }
    return json{{"per_day", std::move(per_day)},
                {"summary",
                 {{"shared_days", report.shared_days},
                  {"mean_l1", report.mean_l1},
                  {"max_l1", report.max_l1},
                  {"equal_fraction", report.equal_fraction}}}};
}

} // namespace regseg
