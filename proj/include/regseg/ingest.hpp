#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <locale>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "regseg/error.hpp"

namespace regseg {

using Date = std::chrono::year_month_day;

inline std::string format_date(Date d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

// Parses text according to a strftime-style pattern (default ISO-8601
// "%Y-%m-%d"), independent of the global locale. nullopt on any mismatch.
inline std::optional<Date> parse_date(std::string_view text, const std::string& pattern = "%Y-%m-%d") {
    std::tm tm{};
    std::istringstream in{std::string(text)};
    in.imbue(std::locale::classic());
    in >> std::get_time(&tm, pattern.c_str());
    if (in.fail()) return std::nullopt;
    in >> std::ws;
    if (!in.eof()) return std::nullopt;
    const Date d{std::chrono::year{tm.tm_year + 1900}, std::chrono::month{static_cast<unsigned>(tm.tm_mon + 1)},
                 std::chrono::day{static_cast<unsigned>(tm.tm_mday)}};
    if (!d.ok()) return std::nullopt;
    return d;
}

inline std::optional<double> parse_double(std::string_view text) {
    double v = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || first == last) return std::nullopt;
    return v;
}

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        fields.push_back(trim(line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return fields;
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Calls fn(line_number, line) for every non-blank line.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
        ++line_no;
        if (!trim(line).empty()) fn(line_no, line);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
}

} // namespace detail

struct PriceRecord {
    Date date;
    double open = 0.0;
    double close = 0.0;

    friend bool operator==(const PriceRecord&, const PriceRecord&) = default;
};

// Column mapping for price files. Extra columns (high, low, volume, ...) are ignored.
struct PriceCsvFormat {
    std::string date_column = "date";
    std::string open_column = "open";
    std::string close_column = "close";
    std::string date_pattern = "%Y-%m-%d";
};

inline std::vector<PriceRecord> parse_price_csv(std::string_view text, const PriceCsvFormat& format = {}) {
    std::vector<PriceRecord> records;
    std::optional<std::size_t> date_col, open_col, close_col;
    std::size_t n_columns = 0;
    std::map<std::chrono::sys_days, std::size_t> seen;

    detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        const auto fields = detail::split_csv_line(line);
        if (!date_col) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                const auto name = detail::lower(fields[i]);
                if (name == detail::lower(format.date_column)) date_col = i;
                if (name == detail::lower(format.open_column)) open_col = i;
                if (name == detail::lower(format.close_column)) close_col = i;
            }
            if (!date_col || !open_col || !close_col) {
                throw ParseError("header must name columns '" + format.date_column + "', '" +
                                     format.open_column + "' and '" + format.close_column + "'",
                                 line_no);
            }
            n_columns = fields.size();
            return;
        }
        if (fields.size() != n_columns) {
            throw ParseError("expected " + std::to_string(n_columns) + " fields, found " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        const auto date = parse_date(fields[*date_col], format.date_pattern);
        if (!date) throw ParseError("unparsable date '" + std::string(fields[*date_col]) + "'", line_no);
        auto price = [&](std::size_t col, const std::string& name) {
            const auto v = parse_double(fields[col]);
            if (!v || !std::isfinite(*v)) {
                throw ParseError("unparsable " + name + " '" + std::string(fields[col]) + "'", line_no);
            }
            if (!(*v > 0.0)) {
                throw ValidationError("line " + std::to_string(line_no) + ": " + format_date(*date) + ": " +
                                      name + " must be positive, got " + std::string(fields[col]));
            }
            return *v;
        };
        const double open = price(*open_col, format.open_column);
        const double close = price(*close_col, format.close_column);
        const auto [it, inserted] = seen.emplace(std::chrono::sys_days{*date}, line_no);
        if (!inserted) {
            throw ValidationError("line " + std::to_string(line_no) + ": duplicate date " + format_date(*date) +
                                  " (first seen on line " + std::to_string(it->second) + ")");
        }
        records.push_back({*date, open, close});
    });
    if (!date_col) throw ParseError("missing header row", 1);
    return records;
}

inline std::string write_price_csv(const std::vector<PriceRecord>& records) {
    std::string out = "date,open,close\n";
    for (const auto& r : records) {
        out += format_date(r.date) + "," + format_double(r.open) + "," + format_double(r.close) + "\n";
    }
    return out;
}

struct ReturnSeries {
    std::string series_id;
    std::vector<Date> dates;
    std::vector<double> returns;

    std::size_t size() const { return returns.size(); }

    friend bool operator==(const ReturnSeries&, const ReturnSeries&) = default;
};

// Open-to-close log-return per day: ln(close) - ln(open). Records are put in
// date order first.
inline ReturnSeries to_returns(std::vector<PriceRecord> records, std::string series_id) {
    std::stable_sort(records.begin(), records.end(),
                     [](const PriceRecord& a, const PriceRecord& b) { return a.date < b.date; });
    ReturnSeries series{std::move(series_id), {}, {}};
    series.dates.reserve(records.size());
    series.returns.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (i > 0 && !(records[i - 1].date < r.date)) {
            throw ValidationError(series.series_id + ": duplicate date " + format_date(r.date));
        }
        if (!(r.open > 0.0) || !(r.close > 0.0)) {
            throw ValidationError(series.series_id + ": non-positive price on " + format_date(r.date));
        }
        series.dates.push_back(r.date);
        series.returns.push_back(std::log(r.close) - std::log(r.open));
    }
    return series;
}

inline std::string write_returns_csv(const ReturnSeries& series) {
    std::string out = "date,log_return\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        out += format_date(series.dates[i]) + "," + format_double(series.returns[i]) + "\n";
    }
    return out;
}

inline ReturnSeries parse_returns_csv(std::string_view text, std::string series_id) {
    ReturnSeries series{std::move(series_id), {}, {}};
    bool header = true;
    detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        const auto fields = detail::split_csv_line(line);
        if (header) {
            if (fields.size() != 2 || detail::lower(fields[0]) != "date" || detail::lower(fields[1]) != "log_return") {
                throw ParseError("expected header 'date,log_return'", line_no);
            }
            header = false;
            return;
        }
        if (fields.size() != 2) throw ParseError("expected 2 fields", line_no);
        const auto d = parse_date(fields[0]);
        const auto v = parse_double(fields[1]);
        if (!d || !v) throw ParseError("malformed row", line_no);
        if (!series.dates.empty() && !(series.dates.back() < *d)) {
            throw ParseError("dates must be strictly increasing", line_no);
        }
        series.dates.push_back(*d);
        series.returns.push_back(*v);
    });
    return series;
}

// Inclusive date range; either end may be open.
struct DateWindow {
    std::optional<Date> from;
    std::optional<Date> to;

    bool contains(Date d) const { return (!from || !(d < *from)) && (!to || !(*to < d)); }

    // "FROM:TO", either side may be empty.
    static DateWindow parse(std::string_view text) {
        const auto colon = text.find(':');
        if (colon == std::string_view::npos) {
            throw ValidationError("date window must look like FROM:TO, got '" + std::string(text) + "'");
        }
        DateWindow w;
        auto side = [&](std::string_view s) -> std::optional<Date> {
            s = detail::trim(s);
            if (s.empty()) return std::nullopt;
            const auto d = parse_date(s);
            if (!d) throw ValidationError("bad date '" + std::string(s) + "' in window");
            return d;
        };
        w.from = side(text.substr(0, colon));
        w.to = side(text.substr(colon + 1));
        if (w.from && w.to && *w.to < *w.from) throw ValidationError("date window ends before it starts");
        return w;
    }
};

enum class CoveragePolicy {
    Strict,   // series missing any calendar day are rejected
    FillZero, // missing days get a zero return; exploratory only
};

struct Panel {
    std::vector<Date> calendar;
    std::vector<ReturnSeries> series; // sorted by series_id, each aligned to calendar
};

struct AlignResult {
    Panel panel;
    std::vector<std::string> rejected; // sorted ids dropped by the coverage policy
};

inline AlignResult align_panel(const std::vector<ReturnSeries>& input, CoveragePolicy policy = CoveragePolicy::Strict,
                               const DateWindow& window = {}) {
    if (input.empty()) throw ValidationError("align_panel: no series");
    std::set<std::chrono::sys_days> days;
    std::set<std::string> ids;
    for (const auto& s : input) {
        if (!ids.insert(s.series_id).second) throw ValidationError("align_panel: duplicate series id " + s.series_id);
        for (const auto& d : s.dates) {
            if (window.contains(d)) days.insert(std::chrono::sys_days{d});
        }
    }
    if (days.empty()) throw ValidationError("align_panel: no data inside the date window");

    AlignResult result;
    for (const auto& d : days) result.panel.calendar.emplace_back(d);
    const auto& calendar = result.panel.calendar;

    for (const auto& s : input) {
        ReturnSeries aligned{s.series_id, calendar, std::vector<double>(calendar.size(), 0.0)};
        std::size_t src = 0;
        bool complete = true;
        for (std::size_t i = 0; i < calendar.size(); ++i) {
            while (src < s.dates.size() && s.dates[src] < calendar[i]) ++src;
            if (src < s.dates.size() && s.dates[src] == calendar[i]) {
                aligned.returns[i] = s.returns[src];
            } else {
                complete = false;
            }
        }
        if (!complete && policy == CoveragePolicy::Strict) {
            result.rejected.push_back(s.series_id);
        } else {
            result.panel.series.push_back(std::move(aligned));
        }
    }
    std::sort(result.panel.series.begin(), result.panel.series.end(),
              [](const ReturnSeries& a, const ReturnSeries& b) { return a.series_id < b.series_id; });
    std::sort(result.rejected.begin(), result.rejected.end());
    return result;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error reading " + path.string());
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("error writing " + path.string());
}

// Newline-separated file paths; blank lines and '#' comments are skipped.
// Relative paths are resolved against the manifest's directory.
inline std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& manifest) {
    std::vector<std::filesystem::path> paths;
    const auto text = read_text_file(manifest);
    detail::for_each_line(text, [&](std::size_t, std::string_view line) {
        const auto entry = detail::trim(line);
        if (entry.front() == '#') return;
        std::filesystem::path p{std::string(entry)};
        if (p.is_relative()) p = manifest.parent_path() / p;
        paths.push_back(std::move(p));
    });
    return paths;
}

// Series id of a price file: its filename stem.
inline ReturnSeries load_price_file(const std::filesystem::path& path, const PriceCsvFormat& format = {}) {
    return to_returns(parse_price_csv(read_text_file(path), format), path.stem().string());
}

} // namespace regseg
