#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace stocknet {

inline double mean_of(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean of empty range");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Population variance (divides by n).
inline double population_variance(std::span<const double> v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

// Sample variance (divides by n-1).
inline double sample_variance(std::span<const double> v) {
    if (v.size() < 2) throw std::invalid_argument("sample variance needs n >= 2");
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

// A numeric result that may be undefined (zero variance, empty cell, ...).
struct MaybeValue {
    std::optional<double> value;
    std::string reason;   // set when value is absent

    static MaybeValue of(double v) { return {v, {}}; }
    static MaybeValue undefined(std::string why) { return {std::nullopt, std::move(why)}; }
    bool defined() const { return value.has_value(); }
};

// Pearson correlation over paired observations; undefined when either side
// has zero variance.
inline MaybeValue pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
    if (x.size() < 2) return MaybeValue::undefined("fewer than 2 pairs");
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return MaybeValue::undefined("zero variance");
    return MaybeValue::of(sxy / std::sqrt(sxx * syy));
}

inline double students_t_cdf(double t, double df) {
    boost::math::students_t dist(df);
    return boost::math::cdf(dist, t);
}

// Upper tail P(X > x) for chi-square with df degrees of freedom.
inline double chi_squared_sf(double x, double df) {
    boost::math::chi_squared dist(df);
    return boost::math::cdf(boost::math::complement(dist, x));
}

struct PairedTestResult {
    std::string group_low;
    std::string group_high;
    MaybeValue t_stat;
    MaybeValue p_value;   // one-tailed, H1: mean(low) < mean(high)
    std::size_t n_pairs = 0;
};

// Classic paired-samples t test on differences (low - high) with the
// one-tailed alternative that the mean difference is negative.
inline PairedTestResult paired_one_tailed_t(std::span<const double> low, std::span<const double> high) {
    if (low.size() != high.size()) throw std::invalid_argument("paired t: length mismatch");
    PairedTestResult r;
    r.n_pairs = low.size();
    if (low.size() < 2) {
        r.t_stat = r.p_value = MaybeValue::undefined("fewer than 2 pairs");
        return r;
    }
    std::vector<double> diff(low.size());
    for (std::size_t i = 0; i < low.size(); ++i) diff[i] = low[i] - high[i];
    const double md = mean_of(diff);
    const double sv = sample_variance(diff);
    if (sv == 0.0) {
        r.t_stat = r.p_value = MaybeValue::undefined("zero variance of differences");
        return r;
    }
    const double n = static_cast<double>(diff.size());
    const double t = md / std::sqrt(sv / n);
    r.t_stat = MaybeValue::of(t);
    r.p_value = MaybeValue::of(students_t_cdf(t, n - 1.0));
    return r;
}

// Shannon entropy in nats of a weight vector normalized to a distribution;
// zero weights contribute nothing.
inline double shannon_entropy(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("entropy: negative weight");
        total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("entropy: weights sum to zero");
    double e = 0.0;
    for (double w : weights) {
        if (w > 0.0) {
            const double p = w / total;
            e -= p * std::log(p);
        }
    }
    return e;
}

// Nearest-rank percentile over an ascending-sorted sequence: 1-based index
// ceil(k*n). k = 0 maps to the smallest element.
template <typename T>
T nearest_rank(const std::vector<T>& sorted_ascending, double k) {
    if (sorted_ascending.empty()) throw std::invalid_argument("nearest_rank on empty sequence");
    if (k < 0.0 || k > 1.0) throw std::invalid_argument("nearest_rank: k outside [0,1]");
    const std::size_t n = sorted_ascending.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(k * static_cast<double>(n)));
    if (rank == 0) rank = 1;
    if (rank > n) rank = n;
    return sorted_ascending[rank - 1];
}

} // namespace stocknet
