// regseg: command-line driver for recursive Gaussian regime segmentation.
//
//   regseg synth      generate piecewise-variance series (optionally segment and score them)
//   regseg segment    segment per-security price files
//   regseg aggregate  quintile-count panel across many securities
//
// Exit codes: 0 success, 2 usage, 3 validation, 4 I/O, 1 anything else.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "regseg/regseg.hpp"

#ifndef REGSEG_VERSION
#define REGSEG_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace regseg;

namespace {

enum ExitCode : int { kOk = 0, kInternal = 1, kUsage = 2, kValidation = 3, kIo = 4 };

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

struct SegmentationFlags {
    std::optional<double> alpha;
    std::optional<double> delta_c;
    int dof = SegmentationConfig::kDefaultDof;
    std::size_t min_seg_len = SegmentationConfig::kDefaultMinSegLen;
    std::string convention = "two-delta";

    void add_to(CLI::App& app) {
        auto* a = app.add_option("--alpha", alpha, "significance level in (0,1); derives delta_c");
        auto* d = app.add_option("--delta-c", delta_c, "stopping threshold on max Delta (default 10)");
        a->excludes(d);
        app.add_option("--dof", dof, "chi-squared degrees of freedom")->check(CLI::PositiveNumber);
        app.add_option("--min-seg-len", min_seg_len, "minimum segment length (>= 2)");
        app.add_option("--threshold-convention", convention, "two-delta | paper-literal")
            ->check(CLI::IsMember({"two-delta", "paper-literal"}));
    }

    SegmentationConfig build() const {
        const auto conv = parse_threshold_convention(convention);
        if (min_seg_len < 2) throw UsageError("--min-seg-len must be >= 2");
        if (alpha) {
            if (!(*alpha > 0.0 && *alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
            return SegmentationConfig::from_alpha(*alpha, dof, min_seg_len, conv);
        }
        const double dc = delta_c.value_or(SegmentationConfig::kDefaultDeltaC);
        if (!(dc > 0.0)) throw UsageError("--delta-c must be positive");
        return SegmentationConfig::from_delta_c(dc, dof, min_seg_len, conv);
    }
};

struct FormatFlags {
    std::string date_col = "date";
    std::string open_col = "open";
    std::string close_col = "close";
    std::string date_format = "%Y-%m-%d";

    void add_to(CLI::App& app) {
        app.add_option("--date-col", date_col, "date column name");
        app.add_option("--open-col", open_col, "open price column name");
        app.add_option("--close-col", close_col, "close price column name");
        app.add_option("--date-format", date_format, "strftime-style date pattern");
    }

    PriceCsvFormat build() const { return {date_col, open_col, close_col, date_format}; }
};

// Collects everything needed to reproduce a run.
class RunManifest {
public:
    RunManifest(std::string command, int argc, char** argv) {
        doc_["tool"] = "regseg";
        doc_["version"] = REGSEG_VERSION;
        doc_["command"] = std::move(command);
        json args = json::array();
        for (int i = 1; i < argc; ++i) args.push_back(argv[i]);
        doc_["argv"] = std::move(args);
        doc_["inputs"] = json::array();
        doc_["outputs"] = json::array();
    }

    void set(const std::string& key, json value) {
        std::lock_guard lock(mutex_);
        doc_[key] = std::move(value);
    }

    void add_input(const fs::path& path, std::string_view bytes) {
        std::lock_guard lock(mutex_);
        doc_["inputs"].push_back({{"path", path.string()}, {"sha256", sha256_hex(bytes)}});
    }

    void write_output(const fs::path& path, std::string_view bytes) {
        write_text_file(path, bytes);
        std::lock_guard lock(mutex_);
        doc_["outputs"].push_back({{"path", path.string()}, {"sha256", sha256_hex(bytes)}});
    }

    void save(const fs::path& dir) {
        for (auto key : {"inputs", "outputs"}) {
            auto& arr = doc_[key];
            std::sort(arr.begin(), arr.end(), [](const json& a, const json& b) { return a["path"] < b["path"]; });
        }
        write_text_file(dir / "run_manifest.json", doc_.dump(2) + "\n");
    }

private:
    json doc_;
    std::mutex mutex_;
};

std::vector<Piece> parse_pieces(const std::string& text) {
    std::vector<Piece> pieces;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto c1 = item.find(':');
        const auto c2 = c1 == std::string::npos ? std::string::npos : item.find(':', c1 + 1);
        if (c2 == std::string::npos) throw UsageError("piece '" + item + "' must be LENGTH:MEAN:STD");
        const auto len = parse_double(item.substr(0, c1));
        const auto mean = parse_double(item.substr(c1 + 1, c2 - c1 - 1));
        const auto sd = parse_double(item.substr(c2 + 1));
        if (!len || !mean || !sd || *len < 1 || *len != std::floor(*len)) {
            throw UsageError("piece '" + item + "' must be LENGTH:MEAN:STD");
        }
        pieces.push_back(Piece{static_cast<std::size_t>(*len), *mean, *sd});
    }
    if (pieces.empty()) throw UsageError("--pieces is empty");
    return pieces;
}

std::string single_column_csv(const std::vector<double>& xs) {
    std::string out = "value\n";
    for (double x : xs) out += format_double(x) + '\n';
    return out;
}

std::string render_forest(const SegmentForest& forest, const std::string& id, const std::vector<Date>* calendar,
                          const std::string& format) {
    if (format == "json") return forest_to_json(forest, id, calendar).dump(2) + "\n";
    return forest_to_csv(forest, id, calendar);
}

struct SynthOptions {
    std::string pieces = "500:0:1,500:0:2,500:0:1,500:0:3";
    std::uint64_t seed = 1;
    std::size_t replicates = 1;
    bool segment = false;
    std::size_t tol = kDefaultBoundaryTolerance;
    std::string out = ".";
    std::string format = "csv";
    SegmentationFlags seg;
};

int run_synth(const SynthOptions& opt, RunManifest& manifest) {
    PiecewiseSpec spec{parse_pieces(opt.pieces), opt.seed};
    spec.validate();
    const auto config = opt.seg.build();
    const bool segment = opt.segment || opt.replicates > 1;
    const fs::path out(opt.out);
    fs::create_directories(out);

    manifest.set("config", {{"pieces", opt.pieces},
                            {"seed", opt.seed},
                            {"replicates", opt.replicates},
                            {"segment", segment},
                            {"tolerance", opt.tol},
                            {"segmentation", config}});

    std::size_t exact = 0, all_matched = 0;
    double worst_param_error = 0.0;
    json runs = json::array();
    for (std::size_t r = 0; r < opt.replicates; ++r) {
        spec.seed = opt.replicates == 1 ? opt.seed : derive_seed(opt.seed, r);
        const auto xs = generate(spec);
        char suffix[32] = "";
        if (opt.replicates > 1) std::snprintf(suffix, sizeof suffix, "_%04zu", r);
        manifest.write_output(out / ("series" + std::string(suffix) + ".csv"), single_column_csv(xs));
        if (!segment) continue;

        const auto forest = recursive_segment(xs, config);
        const auto score = score_recovery(spec, forest, opt.tol);
        manifest.write_output(out / ("forest" + std::string(suffix) + "." + opt.format),
                              render_forest(forest, "synthetic", nullptr, opt.format));
        auto score_json = to_json_value(score);
        score_json["seed"] = spec.seed;
        manifest.write_output(out / ("score" + std::string(suffix) + ".json"), score_json.dump(2) + "\n");

        const bool is_exact = score.found_boundaries.size() == score.true_boundaries.size();
        const bool matched = score.missed == 0 && score.spurious == 0;
        exact += is_exact;
        all_matched += matched;
        if (matched) worst_param_error = std::max(worst_param_error, score.max_param_error());
        runs.push_back({{"replicate", r}, {"seed", spec.seed}, {"found", score.found_boundaries}});
    }
    if (segment) {
        json summary{{"replicates", opt.replicates},
                     {"exact_boundary_count_runs", exact},
                     {"fully_matched_runs", all_matched},
                     {"max_param_error_in_matched_runs", worst_param_error},
                     {"runs", std::move(runs)}};
        manifest.write_output(out / "summary.json", summary.dump(2) + "\n");
        std::cout << "replicates=" << opt.replicates << " exact=" << exact << " matched=" << all_matched
                  << " max_std_rel_error=" << worst_param_error << "\n";
    }
    manifest.save(out);
    return kOk;
}

struct InputOptions {
    std::vector<std::string> files;
    std::string manifest;
    FormatFlags format;

    std::vector<fs::path> paths() const {
        std::vector<fs::path> out(files.begin(), files.end());
        if (!manifest.empty()) {
            const auto listed = read_manifest(manifest);
            out.insert(out.end(), listed.begin(), listed.end());
        }
        if (out.empty()) throw UsageError("no input files (pass paths or --manifest)");
        return out;
    }
};

struct FileFailure {
    fs::path path;
    std::string message;
    int code;
};

// Loads every price file; failures are collected per file unless fail_fast.
std::vector<ReturnSeries> load_all(const std::vector<fs::path>& paths, const PriceCsvFormat& format, unsigned jobs,
                                   bool fail_fast, RunManifest& manifest, std::vector<FileFailure>& failures) {
    std::vector<std::optional<ReturnSeries>> loaded(paths.size());
    std::mutex failure_mutex;
    std::atomic<bool> stop{false};
    parallel_for(paths.size(), jobs, [&](std::size_t i) {
        if (stop) return;
        try {
            const auto text = read_text_file(paths[i]);
            manifest.add_input(paths[i], text);
            loaded[i] = to_returns(parse_price_csv(text, format), paths[i].stem().string());
        } catch (const IoError& e) {
            std::lock_guard lock(failure_mutex);
            failures.push_back({paths[i], e.what(), kIo});
            if (fail_fast) stop = true;
        } catch (const std::exception& e) {
            std::lock_guard lock(failure_mutex);
            failures.push_back({paths[i], e.what(), kValidation});
            if (fail_fast) stop = true;
        }
    });
    std::vector<ReturnSeries> out;
    for (auto& s : loaded) {
        if (s) out.push_back(std::move(*s));
    }
    return out;
}

int report_failures(std::vector<FileFailure>& failures) {
    if (failures.empty()) return kOk;
    std::sort(failures.begin(), failures.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    int code = kValidation;
    for (const auto& f : failures) {
        std::cerr << "error: " << f.path.string() << ": " << f.message << "\n";
        if (f.code == kIo) code = kIo;
    }
    return code;
}

struct SegmentOptions {
    InputOptions input;
    std::string out = ".";
    std::string format = "csv";
    std::string window;
    unsigned jobs = default_jobs();
    bool fail_fast = false;
    SegmentationFlags seg;
};

int run_segment(const SegmentOptions& opt, RunManifest& manifest) {
    const auto config = opt.seg.build();
    const auto window = opt.window.empty() ? DateWindow{} : DateWindow::parse(opt.window);
    const auto paths = opt.input.paths();
    const fs::path out(opt.out);
    fs::create_directories(out);
    manifest.set("config", {{"segmentation", config}, {"window", opt.window}, {"format", opt.format}});

    std::vector<FileFailure> failures;
    auto series = load_all(paths, opt.input.format.build(), opt.jobs, opt.fail_fast, manifest, failures);
    if (opt.fail_fast && !failures.empty()) return report_failures(failures);

    std::mutex failure_mutex;
    parallel_for(series.size(), opt.jobs, [&](std::size_t i) {
        auto& s = series[i];
        ReturnSeries windowed{s.series_id, {}, {}};
        for (std::size_t t = 0; t < s.size(); ++t) {
            if (window.contains(s.dates[t])) {
                windowed.dates.push_back(s.dates[t]);
                windowed.returns.push_back(s.returns[t]);
            }
        }
        if (windowed.returns.empty()) {
            std::lock_guard lock(failure_mutex);
            failures.push_back({s.series_id, "no observations inside the date window", kValidation});
            return;
        }
        const auto forest = recursive_segment(windowed.returns, config);
        manifest.write_output(out / (s.series_id + ".segments." + opt.format),
                              render_forest(forest, s.series_id, &windowed.dates, opt.format));
    });
    manifest.save(out);
    return report_failures(failures);
}

std::vector<Date> read_calendar(const fs::path& path) {
    std::vector<Date> cal;
    const auto text = read_text_file(path);
    regseg::detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        const auto field = regseg::detail::split_csv_line(line).front();
        const auto d = parse_date(field);
        if (!d) {
            if (line_no == 1 && cal.empty()) return; // header
            throw ParseError("bad calendar date '" + std::string(field) + "'", line_no);
        }
        if (!cal.empty() && !(cal.back() < *d)) throw ParseError("calendar dates must increase", line_no);
        cal.push_back(*d);
    });
    return cal;
}

struct AggregateOptions {
    InputOptions input;
    std::vector<std::string> segment_tables;
    std::string calendar;
    std::string out = ".";
    std::string window;
    std::string compare_window;
    std::string coverage = "strict";
    std::string quintile_rule = "midpoint";
    bool monthly = false;
    bool fail_fast = false;
    unsigned jobs = default_jobs();
    SegmentationFlags seg;
};

int run_aggregate(const AggregateOptions& opt, RunManifest& manifest) {
    const auto rule = opt.quintile_rule == "ceil" ? QuintileRule::Ceil : QuintileRule::Midpoint;
    const fs::path out(opt.out);
    fs::create_directories(out);
    QuintilePanel quintiles;
    std::optional<WindowAgreement> agreement;
    json config{{"quintile_rule", to_string(rule)}, {"coverage", opt.coverage}, {"window", opt.window},
                {"compare_window", opt.compare_window}};

    if (!opt.segment_tables.empty()) {
        if (opt.calendar.empty()) throw UsageError("--segments requires --calendar");
        if (!opt.compare_window.empty()) throw UsageError("--compare-window needs raw price inputs");
        const auto calendar = read_calendar(opt.calendar);
        manifest.add_input(opt.calendar, read_text_file(opt.calendar));
        std::vector<std::vector<LabeledSegment>> labeled;
        for (const auto& path : opt.segment_tables) {
            const auto text = read_text_file(path);
            manifest.add_input(path, text);
            auto table = parse_segment_table(text);
            SegmentForest forest;
            forest.segments = std::move(table.segments);
            forest.series_len = calendar.size();
            labeled.push_back(quintile_label(forest, table.series_id, rule));
        }
        quintiles = daily_counts(labeled, calendar);
    } else {
        const auto seg_config = opt.seg.build();
        config["segmentation"] = seg_config;
        const auto window = opt.window.empty() ? DateWindow{} : DateWindow::parse(opt.window);
        std::vector<FileFailure> failures;
        const auto series =
            load_all(opt.input.paths(), opt.input.format.build(), opt.jobs, opt.fail_fast, manifest, failures);
        if (const int code = report_failures(failures); code != kOk) return code;
        const auto policy = opt.coverage == "fill-zero" ? CoveragePolicy::FillZero : CoveragePolicy::Strict;
        auto aligned = align_panel(series, policy, window);
        if (!aligned.rejected.empty()) {
            std::string ids;
            for (const auto& id : aligned.rejected) ids += (ids.empty() ? "" : ", ") + id;
            throw ValidationError("series not covering the full calendar: " + ids);
        }
        const auto full = analyze_panel(aligned.panel, seg_config, rule, opt.jobs);
        quintiles = full.quintiles;
        if (!opt.compare_window.empty()) {
            const auto cut = parse_date(opt.compare_window);
            if (!cut) throw UsageError("--compare-window must be an ISO date");
            const auto truncated = analyze_panel(truncate_panel(aligned.panel, *cut), seg_config, rule, opt.jobs);
            agreement = compare_windows(full.quintiles, truncated.quintiles);
            manifest.write_output(out / "quintile_panel_truncated.csv", quintile_panel_to_csv(truncated.quintiles));
        }
    }
    manifest.set("config", config);
    manifest.write_output(out / "quintile_panel.csv", quintile_panel_to_csv(quintiles));
    if (opt.monthly) manifest.write_output(out / "quintile_panel_monthly.csv", monthly_to_csv(monthly(quintiles)));
    if (agreement) {
        const auto j = to_json_value(*agreement, quintiles.calendar);
        manifest.write_output(out / "agreement.json", j.dump(2) + "\n");
        std::cout << "shared_days=" << agreement->shared_days << " equal_fraction=" << agreement->equal_fraction
                  << " max_l1=" << agreement->max_l1 << "\n";
    }
    manifest.save(out);
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Recursive Gaussian regime segmentation of return series"};
    app.set_version_flag("--version", REGSEG_VERSION);
    app.require_subcommand(1);

    SynthOptions synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate piecewise Gaussian series");
    synth_cmd->add_option("--pieces", synth.pieces, "comma-separated LENGTH:MEAN:STD pieces");
    synth_cmd->add_option("--seed", synth.seed, "base seed");
    synth_cmd->add_option("--replicates", synth.replicates, "number of seeds (implies --segment when > 1)")
        ->check(CLI::PositiveNumber);
    synth_cmd->add_flag("--segment", synth.segment, "segment each series and score boundary recovery");
    synth_cmd->add_option("--tol", synth.tol, "boundary match tolerance in samples");
    synth_cmd->add_option("--out", synth.out, "output directory");
    synth_cmd->add_option("--format", synth.format, "forest format")->check(CLI::IsMember({"csv", "json"}));
    synth.seg.add_to(*synth_cmd);

    SegmentOptions segment;
    auto* segment_cmd = app.add_subcommand("segment", "segment price files");
    segment_cmd->add_option("files", segment.input.files, "price CSV files");
    segment_cmd->add_option("--manifest", segment.input.manifest, "file listing price CSV paths");
    segment_cmd->add_option("--out", segment.out, "output directory");
    segment_cmd->add_option("--format", segment.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
    segment_cmd->add_option("--window", segment.window, "inclusive date window FROM:TO");
    segment_cmd->add_option("--jobs", segment.jobs, "worker threads")->check(CLI::PositiveNumber);
    segment_cmd->add_flag("--fail-fast", segment.fail_fast, "stop at the first bad file");
    segment.input.format.add_to(*segment_cmd);
    segment.seg.add_to(*segment_cmd);

    AggregateOptions aggregate;
    auto* aggregate_cmd = app.add_subcommand("aggregate", "daily quintile counts across securities");
    aggregate_cmd->add_option("files", aggregate.input.files, "price CSV files");
    aggregate_cmd->add_option("--manifest", aggregate.input.manifest, "file listing price CSV paths");
    aggregate_cmd->add_option("--segments", aggregate.segment_tables, "segment tables written by 'segment'");
    aggregate_cmd->add_option("--calendar", aggregate.calendar, "calendar for --segments (one date per line)");
    aggregate_cmd->add_option("--out", aggregate.out, "output directory");
    aggregate_cmd->add_option("--window", aggregate.window, "inclusive date window FROM:TO");
    aggregate_cmd->add_option("--compare-window", aggregate.compare_window,
                              "also run on data up to DATE and report agreement");
    aggregate_cmd->add_option("--coverage", aggregate.coverage, "strict | fill-zero")
        ->check(CLI::IsMember({"strict", "fill-zero"}));
    aggregate_cmd->add_option("--quintile-rule", aggregate.quintile_rule, "midpoint | ceil")
        ->check(CLI::IsMember({"midpoint", "ceil"}));
    aggregate_cmd->add_flag("--monthly", aggregate.monthly, "also write calendar-month aggregation");
    aggregate_cmd->add_flag("--fail-fast", aggregate.fail_fast, "stop at the first bad file");
    aggregate_cmd->add_option("--jobs", aggregate.jobs, "worker threads")->check(CLI::PositiveNumber);
    aggregate.input.format.add_to(*aggregate_cmd);
    aggregate.seg.add_to(*aggregate_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (synth_cmd->parsed()) {
            RunManifest manifest("synth", argc, argv);
            return run_synth(synth, manifest);
        }
        if (segment_cmd->parsed()) {
            RunManifest manifest("segment", argc, argv);
            return run_segment(segment, manifest);
        }
        RunManifest manifest("aggregate", argc, argv);
        return run_aggregate(aggregate, manifest);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const DomainError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInternal;
    }
}
