#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "regseg/error.hpp"
#include "regseg/segmentation.hpp"

namespace regseg {

// SplitMix64 (Steele, Lea and Flood 2014). A fixed 64-bit algorithm so that
// series are bit-reproducible across platforms and standard libraries.
class SplitMix64 {
public:
    using result_type = std::uint64_t;
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    result_type operator()() {
        state_ += kGolden;
        return mix(state_);
    }

    // Independent child stream.
    SplitMix64 split() { return SplitMix64(mix((*this)())); }

    // Uniform on the open interval (0, 1) with 53 random bits.
    double uniform_open() {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

// Seed for replicate r of a batch started from base_seed.
inline std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t replicate) {
    return SplitMix64::mix(base_seed + SplitMix64::kGolden * (replicate + 1));
}

// Basic Box-Muller transform: two uniforms give two independent standard
// normals; the second is cached for the next call.
class BoxMuller {
public:
    explicit BoxMuller(std::uint64_t seed) : rng_(seed) {}

    double operator()() {
        if (cached_) {
            const double z = *cached_;
            cached_.reset();
            return z;
        }
        const double u1 = rng_.uniform_open();
        const double u2 = rng_.uniform_open();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(theta);
        return r * std::cos(theta);
    }

private:
    SplitMix64 rng_;
    std::optional<double> cached_;
};

struct Piece {
    std::size_t length = 0;
    double mean = 0.0;
    double std = 0.0;

    friend bool operator==(const Piece&, const Piece&) = default;
};

struct PiecewiseSpec {
    std::vector<Piece> pieces;
    std::uint64_t seed = 0;

    std::size_t total_length() const {
        std::size_t n = 0;
        for (const auto& p : pieces) n += p.length;
        return n;
    }

    // Start index of every piece but the first.
    std::vector<std::size_t> boundaries() const {
        std::vector<std::size_t> out;
        std::size_t pos = 0;
        for (std::size_t j = 0; j + 1 < pieces.size(); ++j) {
            pos += pieces[j].length;
            out.push_back(pos);
        }
        return out;
    }

    void validate() const {
        if (pieces.empty()) throw DomainError("piecewise spec needs at least one piece");
        for (const auto& p : pieces) {
            if (p.length == 0) throw DomainError("piece length must be positive");
            if (!(p.std >= 0.0) || !std::isfinite(p.std) || !std::isfinite(p.mean)) {
                throw DomainError("piece mean must be finite and std finite and >= 0");
            }
        }
    }

    // Four 500-point zero-mean pieces with standard deviations 1, 2, 1, 3.
    static PiecewiseSpec four_regime_benchmark(std::uint64_t seed) {
        return {{{500, 0.0, 1.0}, {500, 0.0, 2.0}, {500, 0.0, 1.0}, {500, 0.0, 3.0}}, seed};
    }
};

inline std::vector<double> generate(const PiecewiseSpec& spec) {
    spec.validate();
    BoxMuller normal(spec.seed);
    std::vector<double> xs;
    xs.reserve(spec.total_length());
    for (const auto& piece : spec.pieces) {
        for (std::size_t i = 0; i < piece.length; ++i) xs.push_back(piece.mean + piece.std * normal());
    }
    return xs;
}

struct RecoveryScore {
    std::vector<std::size_t> true_boundaries;
    std::vector<std::size_t> found_boundaries;
    std::vector<std::pair<std::size_t, std::size_t>> matched; // (true, found)
    std::size_t missed = 0;
    std::size_t spurious = 0;
    // (true piece index, found segment index) for pieces whose both ends matched
    std::vector<std::pair<std::size_t, std::size_t>> matched_segments;
    // |found std - true std| / true std, aligned with matched_segments
    // (absolute error when the true std is zero)
    std::vector<double> per_segment_param_error;

    double max_param_error() const {
        double m = 0.0;
        for (double e : per_segment_param_error) m = std::max(m, e);
        return m;
    }
};

inline constexpr std::size_t kDefaultBoundaryTolerance = 30;

// Greedy nearest matching of found to true boundaries within tol: candidate
// pairs are taken in increasing distance, each boundary used at most once.
inline RecoveryScore score_recovery(const PiecewiseSpec& truth, const SegmentForest& forest,
                                    std::size_t tol = kDefaultBoundaryTolerance) {
    truth.validate();
    if (forest.series_len != truth.total_length()) {
        throw DomainError("score_recovery: forest covers " + std::to_string(forest.series_len) +
                          " points, spec has " + std::to_string(truth.total_length()));
    }
    RecoveryScore score;
    score.true_boundaries = truth.boundaries();
    score.found_boundaries = forest.boundaries();
    const auto& tb = score.true_boundaries;
    const auto& fb = score.found_boundaries;

    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> candidates; // (dist, ti, fi)
    for (std::size_t i = 0; i < tb.size(); ++i) {
        for (std::size_t j = 0; j < fb.size(); ++j) {
            const std::size_t dist = tb[i] > fb[j] ? tb[i] - fb[j] : fb[j] - tb[i];
            if (dist <= tol) candidates.emplace_back(dist, i, j);
        }
    }
    std::sort(candidates.begin(), candidates.end());
    std::vector<std::optional<std::size_t>> match_of_true(tb.size());
    std::vector<bool> found_used(fb.size(), false);
    for (const auto& [dist, i, j] : candidates) {
        if (match_of_true[i] || found_used[j]) continue;
        match_of_true[i] = j;
        found_used[j] = true;
    }
    for (std::size_t i = 0; i < tb.size(); ++i) {
        if (match_of_true[i]) score.matched.emplace_back(tb[i], fb[*match_of_true[i]]);
    }
    std::sort(score.matched.begin(), score.matched.end());
    score.missed = tb.size() - score.matched.size();
    score.spurious = fb.size() - score.matched.size();

    // Piece p spans true boundaries p-1 .. p; found segment s spans found
    // boundaries s-1 .. s. Series ends are always matched to each other.
    auto found_index_of_left_end = [&](std::size_t piece) -> std::optional<std::size_t> {
        if (piece == 0) return std::size_t{0};
        if (!match_of_true[piece - 1]) return std::nullopt;
        return *match_of_true[piece - 1] + 1;
    };
    auto found_index_of_right_end = [&](std::size_t piece) -> std::optional<std::size_t> {
        if (piece + 1 == truth.pieces.size()) return forest.segments.size() - 1;
        if (!match_of_true[piece]) return std::nullopt;
        return *match_of_true[piece];
    };
    for (std::size_t p = 0; p < truth.pieces.size(); ++p) {
        const auto left = found_index_of_left_end(p);
        const auto right = found_index_of_right_end(p);
        if (!left || !right || *left != *right) continue;
        const double found_std = forest.segments[*left].params.stddev();
        const double true_std = truth.pieces[p].std;
        const double err = true_std > 0.0 ? std::abs(found_std - true_std) / true_std : found_std;
        score.matched_segments.emplace_back(p, *left);
        score.per_segment_param_error.push_back(err);
    }
    return score;
}

} // namespace regseg
