#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "regseg/error.hpp"
#include "regseg/stats.hpp"

namespace regseg {

// How the stopping threshold delta_c relates to the significance level alpha.
//   TwoDelta:     2 * delta_c = chi2_inv_cdf(alpha, k)   (2*Delta is asymptotically chi2(k))
//   PaperLiteral: delta_c = chi2_inv_cdf(alpha, k)       (for k = 2: delta_c = -2 ln(1 - alpha))
// In both cases a split is accepted iff its maximal Delta exceeds delta_c.
enum class ThresholdConvention { TwoDelta, PaperLiteral };

inline const char* to_string(ThresholdConvention c) {
    return c == ThresholdConvention::TwoDelta ? "two-delta" : "paper-literal";
}

class SegmentationConfig {
public:
    static constexpr double kDefaultDeltaC = 10.0;
    static constexpr int kDefaultDof = 2;
    static constexpr std::size_t kDefaultMinSegLen = 25;

    SegmentationConfig() : SegmentationConfig(from_delta_c(kDefaultDeltaC)) {}

    static SegmentationConfig from_delta_c(double delta_c, int dof_k = kDefaultDof,
                                           std::size_t min_seg_len = kDefaultMinSegLen,
                                           ThresholdConvention convention = ThresholdConvention::TwoDelta) {
        if (!(delta_c > 0.0) || !std::isfinite(delta_c)) {
            throw DomainError("delta_c must be a finite positive number");
        }
        detail::check_dof(dof_k);
        // alpha saturates to 1.0 once the tail drops below double resolution
        const double alpha = chi2_cdf(statistic_factor(convention) * delta_c, dof_k);
        return SegmentationConfig(alpha, delta_c, dof_k, min_seg_len, convention);
    }

    static SegmentationConfig from_alpha(double alpha, int dof_k = kDefaultDof,
                                         std::size_t min_seg_len = kDefaultMinSegLen,
                                         ThresholdConvention convention = ThresholdConvention::TwoDelta) {
        const double delta_c = chi2_inv_cdf(alpha, dof_k) / statistic_factor(convention);
        return SegmentationConfig(alpha, delta_c, dof_k, min_seg_len, convention);
    }

    double alpha() const { return alpha_; }
    double delta_c() const { return delta_c_; }
    int dof_k() const { return dof_k_; }
    std::size_t min_seg_len() const { return min_seg_len_; }
    ThresholdConvention convention() const { return convention_; }

    // Critical value of the chi-squared law that the (scaled) statistic is compared to.
    double chi2_critical_value() const { return statistic_factor(convention_) * delta_c_; }

    bool accepts(double max_delta) const { return max_delta > delta_c_; }

    friend bool operator==(const SegmentationConfig&, const SegmentationConfig&) = default;

private:
    SegmentationConfig(double alpha, double delta_c, int dof_k, std::size_t min_seg_len,
                       ThresholdConvention convention)
        : alpha_(alpha), delta_c_(delta_c), dof_k_(dof_k), min_seg_len_(min_seg_len),
          convention_(convention) {
        if (min_seg_len_ < 2) {
            throw DomainError("min_seg_len must be >= 2");
        }
    }

    static double statistic_factor(ThresholdConvention c) {
        return c == ThresholdConvention::TwoDelta ? 2.0 : 1.0;
    }

    double alpha_;
    double delta_c_;
    int dof_k_;
    std::size_t min_seg_len_;
    ThresholdConvention convention_;
};

struct Segment {
    std::size_t start = 0; // inclusive
    std::size_t end = 0;   // exclusive
    GaussianParams params;
    std::optional<double> max_delta; // absent when the segment was never scanned
    std::size_t depth = 0;

    std::size_t length() const { return end - start; }

    friend bool operator==(const Segment&, const Segment&) = default;
};

struct SegmentForest {
    std::vector<Segment> segments;
    std::size_t series_len = 0;
    SegmentationConfig config;

    // Interior change points: the start index of every segment but the first.
    std::vector<std::size_t> boundaries() const {
        std::vector<std::size_t> out;
        for (std::size_t j = 1; j < segments.size(); ++j) out.push_back(segments[j].start);
        return out;
    }

    friend bool operator==(const SegmentForest&, const SegmentForest&) = default;
};

// Delta(t) for t in [0, n]; std::nullopt marks positions that were not evaluated.
using DeltaProfile = std::vector<std::optional<double>>;

namespace detail {

// Variances below this fraction of the window's raw second moment are
// indistinguishable from rounding noise and treated as zero.
inline constexpr double kDegenerateVarianceRatio = 1e-12;

// Prefix sums of x and x^2, taken about a reference value (the series mean)
// so that windowed variances stay accurate under large offsets.
class PrefixMoments {
public:
    explicit PrefixMoments(std::span<const double> xs) : s1_(xs.size() + 1, 0.0L), s2_(xs.size() + 1, 0.0L) {
        long double sum = 0.0L;
        for (double x : xs) sum += x;
        const long double ref = xs.empty() ? 0.0L : sum / static_cast<long double>(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const long double d = static_cast<long double>(xs[i]) - ref;
            s1_[i + 1] = s1_[i] + d;
            s2_[i + 1] = s2_[i] + d * d;
        }
    }

    std::size_t size() const { return s1_.size() - 1; }

    // MLE variance over [from, to), or nullopt if it is numerically zero.
    std::optional<double> variance(std::size_t from, std::size_t to) const {
        const long double n = static_cast<long double>(to - from);
        const long double m1 = (s1_[to] - s1_[from]) / n;
        const long double m2 = (s2_[to] - s2_[from]) / n;
        const long double v = m2 - m1 * m1;
        if (!(v > static_cast<long double>(kDegenerateVarianceRatio) * m2)) return std::nullopt;
        return static_cast<double>(v);
    }

private:
    std::vector<long double> s1_;
    std::vector<long double> s2_;
};

// Delta(t) over the window [from, to) with split at absolute index t.
inline std::optional<double> delta_at(const PrefixMoments& m, std::size_t from, std::size_t to,
                                      std::size_t t, double whole_log_var) {
    const auto vl = m.variance(from, t);
    const auto vr = m.variance(t, to);
    if (!vl || !vr) return std::nullopt;
    const double n = static_cast<double>(to - from);
    const double nl = static_cast<double>(t - from);
    const double nr = static_cast<double>(to - t);
    const double d = 0.5 * (n * whole_log_var - nl * std::log(*vl) - nr * std::log(*vr));
    // nonnegative in exact arithmetic; clamp rounding residue near zero
    return std::max(0.0, d);
}

// Profile over [from, to), indexed relative to from (length to - from + 1).
inline DeltaProfile window_profile(const PrefixMoments& m, std::size_t from, std::size_t to,
                                   std::size_t min_seg_len) {
    const std::size_t n = to - from;
    DeltaProfile profile(n + 1);
    if (n < 2 * min_seg_len) return profile;
    const auto whole = m.variance(from, to);
    if (!whole) return profile;
    const double whole_log_var = std::log(*whole);
    for (std::size_t t = min_seg_len; t <= n - min_seg_len; ++t) {
        profile[t] = delta_at(m, from, to, from + t, whole_log_var);
    }
    return profile;
}

} // namespace detail

// Log likelihood-ratio profile of a two-Gaussian split against one Gaussian:
//   Delta(t) = n ln s - t ln s_L - (n - t) ln s_R
// with s, s_L, s_R the MLE standard deviations of xs, xs[0, t), xs[t, n).
// Only t in [min_seg_len, n - min_seg_len] with nondegenerate sides are evaluated.
inline DeltaProfile delta_profile(std::span<const double> xs, std::size_t min_seg_len) {
    if (min_seg_len < 1) throw DomainError("delta_profile: min_seg_len must be >= 1");
    if (xs.size() < 2 * min_seg_len) {
        throw DomainError("delta_profile: series of length " + std::to_string(xs.size()) +
                          " is shorter than 2 * min_seg_len");
    }
    const detail::PrefixMoments moments(xs);
    return detail::window_profile(moments, 0, xs.size(), min_seg_len);
}

struct Split {
    std::size_t t = 0;
    double max_delta = 0.0;

    friend bool operator==(const Split&, const Split&) = default;
};

// Argmax of the profile; ties go to the smallest t. nullopt if nothing was evaluated.
inline std::optional<Split> best_split(const DeltaProfile& profile) {
    std::optional<Split> best;
    for (std::size_t t = 0; t < profile.size(); ++t) {
        if (!profile[t]) continue;
        if (!best || *profile[t] > best->max_delta) best = Split{t, *profile[t]};
    }
    return best;
}

// Same statistic written through Gaussian entropies:
//   Delta(t) = n H[whole] - t H[left] - (n - t) H[right].
inline double entropy_form_delta(std::span<const double> xs, std::size_t t) {
    const std::size_t n = xs.size();
    if (t == 0 || t >= n) {
        throw DomainError("entropy_form_delta: split index must lie in (0, n)");
    }
    const auto whole = mle_fit(xs, 0, n);
    const auto left = mle_fit(xs, 0, t);
    const auto right = mle_fit(xs, t, n);
    if (!(whole.variance > 0.0) || !(left.variance > 0.0) || !(right.variance > 0.0)) {
        throw DomainError("entropy_form_delta: zero variance on a side of the split");
    }
    return static_cast<double>(n) * gaussian_entropy(whole.variance) -
           static_cast<double>(t) * gaussian_entropy(left.variance) -
           static_cast<double>(n - t) * gaussian_entropy(right.variance);
}

namespace detail {

inline void segment_window(std::span<const double> xs, const PrefixMoments& moments,
                           const SegmentationConfig& config, std::size_t from, std::size_t to,
                           std::size_t depth, std::vector<Segment>& out) {
    std::optional<double> max_delta;
    if (to - from >= 2 * config.min_seg_len()) {
        const auto profile = window_profile(moments, from, to, config.min_seg_len());
        if (const auto split = best_split(profile)) {
            if (config.accepts(split->max_delta)) {
                const std::size_t cut = from + split->t;
                segment_window(xs, moments, config, from, cut, depth + 1, out);
                segment_window(xs, moments, config, cut, to, depth + 1, out);
                return;
            }
            max_delta = split->max_delta;
        }
    }
    out.push_back(Segment{from, to, mle_fit(xs, from, to), max_delta, depth});
}

} // namespace detail

// Depth-first recursive binary segmentation. A window is split at the argmax
// of its Delta profile while that maximum exceeds config.delta_c(); each child
// window is then treated the same way. Segments come back in index order.
inline SegmentForest recursive_segment(std::span<const double> xs, const SegmentationConfig& config) {
    if (xs.empty()) throw DomainError("recursive_segment: empty series");
    SegmentForest forest{{}, xs.size(), config};
    const detail::PrefixMoments moments(xs);
    detail::segment_window(xs, moments, config, 0, xs.size(), 0, forest.segments);
    return forest;
}

} // namespace regseg
