#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "stocknet/metrics.hpp"
#include "stocknet/network.hpp"
#include "stocknet/rng.hpp"
#include "stocknet/stats.hpp"
#include "stocknet/timeseries.hpp"

namespace stocknet {

enum class LagCriterion { Aic, Bic };

struct GrangerConfig {
    double alpha = 0.05;
    int max_lag = 10;
    // BIC keeps the null rejection rate at the nominal level on intraday
    // sample sizes; AIC's pretest bias inflates it past 0.07 at T = 200.
    LagCriterion lag_criterion = LagCriterion::Bic;
    int d_max = 1;                  // extra augmentation lags, 0..2
    int min_valid_points = 60;      // minimum jointly valid observations
    double min_variance = 1e-12;    // degeneracy threshold on the change scale
};

enum class GrangerStatus { Tested, Skipped };

struct GrangerOutcome {
    std::string source;
    std::string target;
    std::string date;
    GrangerStatus status = GrangerStatus::Skipped;
    std::string skip_reason;
    double p_value = std::numeric_limits<double>::quiet_NaN();
    double wald_stat = std::numeric_limits<double>::quiet_NaN();
    int lag_m = 0;
    bool reject = false;

    bool tested() const { return status == GrangerStatus::Tested; }
    std::string status_text() const {
        return tested() ? "tested" : "skipped(" + skip_reason + ")";
    }
};

namespace detail {

// Lag-augmented Granger test of "x does not cause y" on aligned series.
//
// 1. align on jointly valid minutes;
// 2. pick the VAR lag m <= max_lag by AIC/BIC on the bivariate system over a
//    common sample;
// 3. OLS for y with intercept and m + d_max lags of both series;
// 4. Wald test that the first m x-lag coefficients are jointly zero, with
//    the d_max augmentation lags left unrestricted, referred to chi-square
//    with m degrees of freedom.
//
// Both series are standardized internally; the Wald statistic is invariant
// under positive affine maps of either series, so this only conditions the
// regression.
inline GrangerOutcome ty_granger_aligned(const std::vector<double>& x_raw, const std::vector<double>& y_raw,
                                         const GrangerConfig& cfg) {
    GrangerOutcome out;

    std::vector<double> x, y;
    x.reserve(x_raw.size());
    y.reserve(y_raw.size());
    const std::size_t len = std::min(x_raw.size(), y_raw.size());
    for (std::size_t t = 0; t < len; ++t) {
        if (is_valid(x_raw[t]) && is_valid(y_raw[t])) {
            x.push_back(x_raw[t]);
            y.push_back(y_raw[t]);
        }
    }
    const int n = static_cast<int>(x.size());
    if (n < cfg.min_valid_points) {
        out.skip_reason = "insufficient data";
        return out;
    }
    const double vx = population_variance(x);
    const double vy = population_variance(y);
    if (vx < cfg.min_variance || vy < cfg.min_variance) {
        out.skip_reason = "degenerate series";
        return out;
    }
    const double mx = mean_of(x), my = mean_of(y);
    const double sx = std::sqrt(vx), sy = std::sqrt(vy);
    for (int t = 0; t < n; ++t) {
        x[t] = (x[t] - mx) / sx;
        y[t] = (y[t] - my) / sy;
    }

    // Largest lag that still leaves a workable sample for both the selection
    // fits and the augmented regression.
    int lag_cap = cfg.max_lag;
    while (lag_cap > 1 && n - (lag_cap + cfg.d_max) < 2 * (lag_cap + cfg.d_max) + 1 + 8) --lag_cap;
    if (n - (1 + cfg.d_max) < 2 * (1 + cfg.d_max) + 1 + 8) {
        out.skip_reason = "insufficient data";
        return out;
    }

    // Lag-order selection on a common sample of T_sel rows.
    const int sel_base = lag_cap;
    const int t_sel = n - sel_base;
    Eigen::VectorXd ysel(t_sel), xsel(t_sel);
    for (int t = 0; t < t_sel; ++t) {
        ysel(t) = y[sel_base + t];
        xsel(t) = x[sel_base + t];
    }
    Eigen::MatrixXd lags(t_sel, 2 * lag_cap);
    for (int l = 1; l <= lag_cap; ++l) {
        for (int t = 0; t < t_sel; ++t) {
            lags(t, 2 * (l - 1)) = y[sel_base + t - l];
            lags(t, 2 * (l - 1) + 1) = x[sel_base + t - l];
        }
    }
    int best_m = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (int m = 1; m <= lag_cap; ++m) {
        const int k = 1 + 2 * m;
        Eigen::MatrixXd design(t_sel, k);
        design.col(0).setOnes();
        design.block(0, 1, t_sel, 2 * m) = lags.leftCols(2 * m);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
        if (qr.rank() < k) continue;
        const Eigen::VectorXd ey = ysel - design * qr.solve(ysel);
        const Eigen::VectorXd ex = xsel - design * qr.solve(xsel);
        const double t_eff = static_cast<double>(t_sel);
        const double syy = ey.squaredNorm() / t_eff;
        const double sxx = ex.squaredNorm() / t_eff;
        const double sxy = ey.dot(ex) / t_eff;
        const double det = syy * sxx - sxy * sxy;
        if (!(det > 0.0)) continue;
        const double params = 4.0 * m + 2.0;   // K^2 * m + K for K = 2
        const double penalty = cfg.lag_criterion == LagCriterion::Aic
                                   ? 2.0 * params / t_eff
                                   : std::log(t_eff) * params / t_eff;
        const double score = std::log(det) + penalty;
        if (score < best_score) {
            best_score = score;
            best_m = m;
        }
    }
    if (best_m == 0) {
        out.skip_reason = "singular fit";
        return out;
    }

    // Augmented regression for y on m + d_max lags of y and x.
    const int p_aug = best_m + cfg.d_max;
    const int t_fit = n - p_aug;
    const int k = 1 + 2 * p_aug;
    Eigen::MatrixXd design(t_fit, k);
    Eigen::VectorXd yv(t_fit);
    design.col(0).setOnes();
    for (int t = 0; t < t_fit; ++t) {
        yv(t) = y[p_aug + t];
        for (int l = 1; l <= p_aug; ++l) {
            design(t, l) = y[p_aug + t - l];
            design(t, p_aug + l) = x[p_aug + t - l];
        }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < k) {
        out.skip_reason = "singular fit";
        return out;
    }
    const Eigen::VectorXd beta = qr.solve(yv);
    const Eigen::VectorXd resid = yv - design * beta;
    const double dof = static_cast<double>(t_fit - k);
    if (dof <= 0) {
        out.skip_reason = "insufficient data";
        return out;
    }
    const double sigma2 = resid.squaredNorm() / dof;
    if (!(sigma2 > 0.0)) {
        out.skip_reason = "degenerate series";
        return out;
    }

    Eigen::MatrixXd xtx_inv =
        (design.transpose() * design).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    // Restricted set: the first best_m x-lag coefficients (columns 1+p_aug ...).
    const int r0 = 1 + p_aug;
    const Eigen::VectorXd b_r = beta.segment(r0, best_m);
    const Eigen::MatrixXd s_rr = xtx_inv.block(r0, r0, best_m, best_m);
    Eigen::LDLT<Eigen::MatrixXd> srr_ldlt(s_rr);
    if (srr_ldlt.info() != Eigen::Success || !srr_ldlt.isPositive()) {
        out.skip_reason = "singular fit";
        return out;
    }
    const double wald = b_r.dot(srr_ldlt.solve(b_r)) / sigma2;
    if (!std::isfinite(wald) || wald < 0.0) {
        out.skip_reason = "singular fit";
        return out;
    }

    out.status = GrangerStatus::Tested;
    out.skip_reason.clear();
    out.lag_m = best_m;
    out.wald_stat = wald;
    out.p_value = chi_squared_sf(wald, static_cast<double>(best_m));
    out.reject = out.p_value < cfg.alpha;
    return out;
}

} // namespace detail

// Tests whether `x` Granger-causes `y`. Both series must sit on the same
// session grid for the same date.
inline GrangerOutcome ty_granger(const ChangeSeries& x, const ChangeSeries& y, const GrangerConfig& cfg) {
    if (x.trade_date != y.trade_date)
        throw std::invalid_argument("ty_granger: series on different dates");
    if (x.changes.size() != y.changes.size())
        throw std::invalid_argument("ty_granger: series on different session grids");
    GrangerOutcome out = detail::ty_granger_aligned(x.changes, y.changes, cfg);
    out.source = x.stock_id;
    out.target = y.stock_id;
    out.date = x.trade_date;
    return out;
}

using ChangeSeriesMap = std::unordered_map<std::string, ChangeSeries>;

struct RunPairsResult {
    std::vector<GrangerOutcome> outcomes;   // submitted order after dedup
    std::size_t tested = 0;
    std::size_t skipped = 0;
};

// Runs the pairwise engine over deduplicated ordered pairs. Outcomes land in
// a preallocated slot per pair, so results are bit-identical for any worker
// count.
inline RunPairsResult run_pairs(const std::vector<std::pair<std::string, std::string>>& pairs,
                                const ChangeSeriesMap& changes, const GrangerConfig& cfg, int workers = 1) {
    std::vector<std::pair<std::string, std::string>> unique_pairs;
    {
        std::set<std::pair<std::string, std::string>> seen;
        unique_pairs.reserve(pairs.size());
        for (const auto& p : pairs)
            if (seen.insert(p).second) unique_pairs.push_back(p);
    }

    RunPairsResult result;
    result.outcomes.resize(unique_pairs.size());
    if (workers < 1) workers = 1;

    auto worker_fn = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto& [src, dst] = unique_pairs[i];
            GrangerOutcome& out = result.outcomes[i];
            auto xs = changes.find(src);
            auto ys = changes.find(dst);
            if (xs == changes.end() || ys == changes.end()) {
                out.source = src;
                out.target = dst;
                out.date = xs != changes.end()   ? xs->second.trade_date
                           : ys != changes.end() ? ys->second.trade_date
                                                 : "";
                out.status = GrangerStatus::Skipped;
                out.skip_reason = "missing series";
                continue;
            }
            out = ty_granger(xs->second, ys->second, cfg);
        }
    };

    if (workers == 1 || unique_pairs.size() < 2) {
        worker_fn(0, unique_pairs.size());
    } else {
        std::vector<std::thread> threads;
        const std::size_t n = unique_pairs.size();
        const std::size_t chunk = (n + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const std::size_t begin = std::min(n, static_cast<std::size_t>(w) * chunk);
            const std::size_t end = std::min(n, begin + chunk);
            if (begin < end) threads.emplace_back(worker_fn, begin, end);
        }
        for (auto& t : threads) t.join();
    }

    for (const auto& o : result.outcomes)
        (o.tested() ? result.tested : result.skipped) += 1;
    return result;
}

// Edge-weight quantile partition used by the weight-bin rejection report.
struct WeightPartition {
    std::array<Cents, 3> thresholds{};   // W_0.4, W_0.7, W_0.9
    static constexpr int kBins = 4;

    static const char* label(int bin) {
        static const char* labels[kBins] = {
            "0<w<=W0.4", "W0.4<w<=W0.7", "W0.7<w<=W0.9", "W0.9<w"};
        return labels[bin];
    }

    int bin_of(Cents w) const {
        if (w <= thresholds[0]) return 0;
        if (w <= thresholds[1]) return 1;
        if (w <= thresholds[2]) return 2;
        return 3;
    }
};

inline WeightPartition weight_partition(const StockNetwork& net) {
    if (net.edge_count() == 0) throw std::invalid_argument("weight_partition: no edges");
    std::vector<Cents> weights;
    weights.reserve(net.edge_count());
    for (const auto& e : net.edges()) weights.push_back(e.weight);
    std::sort(weights.begin(), weights.end());
    WeightPartition p;
    p.thresholds = {nearest_rank(weights, 0.4), nearest_rank(weights, 0.7), nearest_rank(weights, 0.9)};
    return p;
}

struct BinRatio {
    std::string label;
    std::size_t tested = 0;
    std::size_t rejected = 0;
    std::size_t skipped = 0;
    MaybeValue ratio;
};

// Rejection ratio per weight bin over the network's edges; skipped tests are
// excluded from denominators.
inline std::vector<BinRatio> ratio_by_weight_bin(const std::vector<GrangerOutcome>& outcomes,
                                                 const StockNetwork& net, const WeightPartition& partition) {
    std::unordered_map<std::uint64_t, Cents> edge_weight;
    edge_weight.reserve(net.edge_count() * 2);
    for (const auto& e : net.edges())
        edge_weight[(static_cast<std::uint64_t>(e.src) << 32) | static_cast<std::uint32_t>(e.dst)] = e.weight;

    std::vector<BinRatio> bins(WeightPartition::kBins);
    for (int b = 0; b < WeightPartition::kBins; ++b) bins[b].label = WeightPartition::label(b);
    for (const auto& o : outcomes) {
        const int s = net.node_index(o.source);
        const int t = net.node_index(o.target);
        if (s < 0 || t < 0) continue;
        auto it = edge_weight.find((static_cast<std::uint64_t>(s) << 32) | static_cast<std::uint32_t>(t));
        if (it == edge_weight.end()) continue;   // outcome not on a network edge
        auto& bin = bins[partition.bin_of(it->second)];
        if (o.tested()) {
            ++bin.tested;
            if (o.reject) ++bin.rejected;
        } else {
            ++bin.skipped;
        }
    }
    for (auto& b : bins) {
        b.ratio = b.tested > 0
                      ? MaybeValue::of(static_cast<double>(b.rejected) / static_cast<double>(b.tested))
                      : MaybeValue::undefined("no tested edges in bin");
    }
    return bins;
}

struct HubRatio {
    std::string hub;
    std::size_t tested = 0;
    std::size_t rejected = 0;
    std::size_t skipped = 0;
    MaybeValue ratio;
};

// Per-hub rejection ratio over the hub's out-edges.
inline std::vector<HubRatio> ratio_for_hubs(const std::vector<GrangerOutcome>& outcomes,
                                            const StockNetwork& net, std::size_t top_n) {
    auto hubs = net.top_by_out_degree(top_n);
    std::unordered_map<std::string, std::unordered_map<std::string, const GrangerOutcome*>> by_source;
    for (const auto& o : outcomes) by_source[o.source][o.target] = &o;

    std::vector<HubRatio> out;
    for (int hub : hubs) {
        HubRatio r;
        r.hub = net.nodes()[hub];
        auto it = by_source.find(r.hub);
        for (int succ : net.successors(hub)) {
            const GrangerOutcome* o = nullptr;
            if (it != by_source.end()) {
                auto jt = it->second.find(net.nodes()[succ]);
                if (jt != it->second.end()) o = jt->second;
            }
            if (!o) continue;
            if (o->tested()) {
                ++r.tested;
                if (o->reject) ++r.rejected;
            } else {
                ++r.skipped;
            }
        }
        r.ratio = r.tested > 0
                      ? MaybeValue::of(static_cast<double>(r.rejected) / static_cast<double>(r.tested))
                      : MaybeValue::undefined("no tested successors");
        out.push_back(std::move(r));
    }
    return out;
}

struct AverageLevelResult {
    std::size_t sampled = 0;
    std::size_t tested = 0;
    std::size_t rejected = 0;
    MaybeValue ratio;
    double standard_error = 0.0;   // binomial SE over tested pairs
    bool exhaustive = false;
};

// Rejection ratio over a uniform sample of distinct ordered stock pairs, or
// over every ordered pair when exhaustive is set.
inline AverageLevelResult average_level(const ChangeSeriesMap& changes, const GrangerConfig& cfg,
                                        std::size_t sample_size, std::uint64_t seed, int workers = 1,
                                        bool exhaustive = false) {
    std::vector<std::string> ids;
    ids.reserve(changes.size());
    for (const auto& [id, _] : changes) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    const std::uint64_t n = ids.size();

    AverageLevelResult result;
    if (n < 2) {
        result.ratio = MaybeValue::undefined("fewer than 2 series");
        return result;
    }
    const std::uint64_t all_pairs = n * (n - 1);
    std::vector<std::pair<std::string, std::string>> pairs;
    if (exhaustive || sample_size >= all_pairs) {
        result.exhaustive = true;
        pairs.reserve(all_pairs);
        for (std::uint64_t i = 0; i < n; ++i)
            for (std::uint64_t j = 0; j < n; ++j)
                if (i != j) pairs.emplace_back(ids[i], ids[j]);
    } else {
        if (sample_size < 1000) throw std::invalid_argument("average_level: sample_size must be >= 1000");
        Rng rng(derive_seed(seed, "average_level"));
        std::unordered_set<std::uint64_t> chosen;
        chosen.reserve(sample_size * 2);
        pairs.reserve(sample_size);
        while (pairs.size() < sample_size) {
            const std::uint64_t i = rng.below(n);
            const std::uint64_t j = rng.below(n);
            if (i == j) continue;
            if (!chosen.insert(i * n + j).second) continue;
            pairs.emplace_back(ids[i], ids[j]);
        }
    }

    auto run = run_pairs(pairs, changes, cfg, workers);
    result.sampled = pairs.size();
    result.tested = run.tested;
    for (const auto& o : run.outcomes)
        if (o.tested() && o.reject) ++result.rejected;
    if (result.tested > 0) {
        const double r = static_cast<double>(result.rejected) / static_cast<double>(result.tested);
        result.ratio = MaybeValue::of(r);
        result.standard_error = std::sqrt(r * (1.0 - r) / static_cast<double>(result.tested));
    } else {
        result.ratio = MaybeValue::undefined("no testable pairs");
    }
    return result;
}

// Fills granger_density on an existing rich-club curve: the share of ordered
// pairs inside the top-r subgraph whose edge outcome rejected the null.
inline void rich_club_granger(const std::vector<GrangerOutcome>& outcomes, const StockNetwork& net,
                              std::vector<RichClubPoint>& curve) {
    int max_r = 0;
    for (const auto& p : curve) max_r = std::max(max_r, p.r);
    auto top = net.top_by_out_degree(static_cast<std::size_t>(max_r));
    std::vector<int> rank_of(net.node_count(), -1);
    for (std::size_t i = 0; i < top.size(); ++i) rank_of[top[i]] = static_cast<int>(i);

    // Rejected intra-club edges, bucketed by the deeper endpoint's rank so
    // each r only needs a prefix sum.
    std::vector<std::size_t> rejected_at_depth(static_cast<std::size_t>(max_r) + 1, 0);
    for (const auto& o : outcomes) {
        if (!o.tested() || !o.reject) continue;
        const int s = net.node_index(o.source);
        const int t = net.node_index(o.target);
        if (s < 0 || t < 0) continue;
        if (rank_of[s] < 0 || rank_of[t] < 0) continue;
        const int depth = std::max(rank_of[s], rank_of[t]) + 1;
        if (depth <= max_r) ++rejected_at_depth[depth];
    }
    for (std::size_t d = 1; d < rejected_at_depth.size(); ++d) rejected_at_depth[d] += rejected_at_depth[d - 1];

    for (auto& p : curve) {
        if (p.r < 2) {
            p.granger_density = MaybeValue::undefined("r < 2");
            continue;
        }
        const double e_bar = static_cast<double>(rejected_at_depth[p.r]);
        p.granger_density = MaybeValue::of(e_bar / (static_cast<double>(p.r) * (p.r - 1.0)));
    }
}

} // namespace stocknet
