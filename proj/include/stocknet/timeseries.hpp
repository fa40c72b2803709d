#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "stocknet/ingest.hpp"
#include "stocknet/metrics.hpp"
#include "stocknet/network.hpp"
#include "stocknet/rng.hpp"

namespace stocknet {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_valid(double x) { return std::isfinite(x); }

// Minute-indexed percentage changes against the prior close. Missing minutes
// remain NaN only where no earlier price exists in the session; interior
// gaps are filled by carrying the last traded price forward.
struct ChangeSeries {
    std::string stock_id;
    std::string trade_date;
    std::vector<double> changes;   // (p_t - prev_close) / prev_close, NaN = missing

    int valid_count() const {
        int n = 0;
        for (double c : changes)
            if (is_valid(c)) ++n;
        return n;
    }
};

inline ChangeSeries minute_changes(const MinuteBarSeries& series) {
    if (!series.has_prev_close())
        throw std::invalid_argument("minute_changes: no prev_close for " + series.stock_id + " on " + series.trade_date);
    ChangeSeries out;
    out.stock_id = series.stock_id;
    out.trade_date = series.trade_date;
    out.changes.resize(series.minute_prices.size(), kMissing);
    double last = kMissing;
    for (std::size_t t = 0; t < series.minute_prices.size(); ++t) {
        const double p = series.minute_prices[t];
        if (is_valid(p)) last = p;
        if (is_valid(last)) out.changes[t] = (last - series.prev_close) / series.prev_close;
    }
    return out;
}

// Non-overlapping window aggregation: the change at the last valid minute of
// each window. The window length must divide the session length.
struct WindowedChanges {
    std::string stock_id;
    std::string trade_date;
    int window_minutes = 0;
    std::vector<double> values;   // one per window, NaN = all-missing window
};

inline WindowedChanges window_last(const ChangeSeries& changes, int window_minutes) {
    const int session = static_cast<int>(changes.changes.size());
    if (window_minutes <= 0 || session % window_minutes != 0)
        throw std::invalid_argument("window_last: window must divide the session length");
    WindowedChanges out;
    out.stock_id = changes.stock_id;
    out.trade_date = changes.trade_date;
    out.window_minutes = window_minutes;
    const int n_windows = session / window_minutes;
    out.values.resize(n_windows, kMissing);
    for (int w = 0; w < n_windows; ++w) {
        for (int t = (w + 1) * window_minutes - 1; t >= w * window_minutes; --t) {
            if (is_valid(changes.changes[t])) {
                out.values[w] = changes.changes[t];
                break;
            }
        }
    }
    return out;
}

// Unweighted per-window means of each out-degree group; a cell is missing
// when no stock in the group has a valid value in that window. Stocks not in
// the partition's network are ignored.
struct GroupMeanTable {
    int n_windows = 0;
    // [window][group], NaN = missing cell
    std::vector<std::array<double, DegreePartition::kGroups>> means;
    std::vector<std::array<int, DegreePartition::kGroups>> counts;
    std::array<int, DegreePartition::kGroups> stocks_seen{};
};

inline GroupMeanTable group_mean_changes(const std::vector<WindowedChanges>& windowed, const StockNetwork& net,
                                         const DegreePartition& partition) {
    GroupMeanTable out;
    if (windowed.empty()) return out;
    out.n_windows = static_cast<int>(windowed.front().values.size());
    std::vector<std::array<double, DegreePartition::kGroups>> sums(
        out.n_windows, std::array<double, DegreePartition::kGroups>{});
    std::vector<std::array<int, DegreePartition::kGroups>> counts(
        out.n_windows, std::array<int, DegreePartition::kGroups>{});

    for (const auto& s : windowed) {
        if (static_cast<int>(s.values.size()) != out.n_windows)
            throw std::invalid_argument("group_mean_changes: inconsistent window counts");
        const int node = net.node_index(s.stock_id);
        if (node < 0) continue;
        const int g = partition.group_of[node];
        bool seen = false;
        for (int w = 0; w < out.n_windows; ++w) {
            if (!is_valid(s.values[w])) continue;
            sums[w][g] += s.values[w];
            ++counts[w][g];
            seen = true;
        }
        if (seen) ++out.stocks_seen[g];
    }
    out.means.resize(out.n_windows);
    out.counts = counts;
    for (int w = 0; w < out.n_windows; ++w)
        for (int g = 0; g < DegreePartition::kGroups; ++g)
            out.means[w][g] = counts[w][g] > 0 ? sums[w][g] / counts[w][g] : kMissing;
    return out;
}

// One hub's scatter: per window, the hub's own change against the unweighted
// mean change of its successors. Points with no hub value or no valid
// successor are missing.
struct ScatterSeries {
    std::string hub_id;
    int successor_count = 0;
    std::vector<double> hub_change;        // per window, NaN = missing
    std::vector<double> successor_mean;    // per window, NaN = missing
};

namespace detail {

// Windowed values keyed by node index; missing stocks have empty slots.
struct WindowGrid {
    int n_windows = 0;
    std::vector<std::vector<double>> by_node;   // empty vector = no series

    static WindowGrid build(const std::vector<WindowedChanges>& windowed, const StockNetwork& net) {
        WindowGrid g;
        g.by_node.resize(net.node_count());
        for (const auto& s : windowed) {
            const int node = net.node_index(s.stock_id);
            if (node < 0) continue;
            if (g.n_windows == 0) g.n_windows = static_cast<int>(s.values.size());
            if (static_cast<int>(s.values.size()) != g.n_windows)
                throw std::invalid_argument("inconsistent window counts");
            g.by_node[node] = s.values;
        }
        return g;
    }

    double value(int node, int w) const {
        return by_node[node].empty() ? kMissing : by_node[node][w];
    }
    bool has_series(int node) const { return !by_node[node].empty(); }
};

// Scatter under a node relabeling: node v carries the series of stock
// perm[v]. The identity permutation reproduces the empirical scatter.
inline std::vector<ScatterSeries> scatter_relabeled(const StockNetwork& net, const WindowGrid& grid,
                                                    std::size_t top_n, const std::vector<int>& perm) {
    // Degrees in relabeled space: node perm[v] has the structural degrees of v.
    std::vector<int> relabeled_degree(net.node_count());
    std::vector<int> struct_of(net.node_count());
    for (int v = 0; v < net.node_count(); ++v) {
        relabeled_degree[perm[v]] = net.out_degree(v);
        struct_of[perm[v]] = v;
    }
    std::vector<int> order(net.node_count());
    for (int i = 0; i < net.node_count(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return relabeled_degree[a] != relabeled_degree[b] ? relabeled_degree[a] > relabeled_degree[b] : a < b;
    });
    if (order.size() > top_n) order.resize(top_n);

    std::vector<ScatterSeries> out;
    for (int hub_label : order) {
        const int hub_struct = struct_of[hub_label];
        ScatterSeries s;
        s.hub_id = net.nodes()[hub_label];
        s.successor_count = net.out_degree(hub_struct);
        s.hub_change.assign(grid.n_windows, kMissing);
        s.successor_mean.assign(grid.n_windows, kMissing);
        for (int w = 0; w < grid.n_windows; ++w) {
            const double own = grid.value(hub_label, w);
            if (!is_valid(own)) continue;
            double sum = 0.0;
            int count = 0;
            for (int succ_struct : net.successors(hub_struct)) {
                const int succ_label = perm[succ_struct];
                if (succ_label == hub_label) continue;
                const double v = grid.value(succ_label, w);
                if (!is_valid(v)) continue;
                sum += v;
                ++count;
            }
            if (count == 0) continue;
            s.hub_change[w] = own;
            s.successor_mean[w] = sum / count;
        }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace detail

inline std::vector<ScatterSeries> hub_successor_scatter(const StockNetwork& net,
                                                        const std::vector<WindowedChanges>& windowed,
                                                        std::size_t top_n) {
    int positive = 0;
    for (int v = 0; v < net.node_count(); ++v)
        if (net.out_degree(v) > 0) ++positive;
    if (static_cast<int>(top_n) > positive)
        throw std::invalid_argument("hub_successor_scatter: top_n exceeds nodes with positive out-degree");
    auto grid = detail::WindowGrid::build(windowed, net);
    std::vector<int> identity(net.node_count());
    for (int i = 0; i < net.node_count(); ++i) identity[i] = i;
    return detail::scatter_relabeled(net, grid, top_n, identity);
}

// Trial-averaged scatter for the two randomization experiments. Per (rank,
// window): means of the hub change and successor mean over trials where the
// point exists, plus the mean and standard error of (successor - hub).
struct RandomScatterSummary {
    int top_n = 0;
    int n_windows = 0;
    int trials = 0;
    // [rank][window]
    std::vector<std::vector<double>> mean_hub;
    std::vector<std::vector<double>> mean_successor;
    std::vector<std::vector<int>> point_trials;
    double grand_mean_diff = 0.0;   // mean over trials of the per-trial mean diff
    double grand_se_diff = 0.0;     // standard error of that mean over trials
    int grand_trials = 0;           // trials contributing at least one point
};

namespace detail {

class ScatterAccumulator {
public:
    ScatterAccumulator(int top_n, int n_windows)
        : top_n_(top_n), n_windows_(n_windows),
          sum_hub_(top_n, std::vector<double>(n_windows, 0.0)),
          sum_succ_(top_n, std::vector<double>(n_windows, 0.0)),
          count_(top_n, std::vector<int>(n_windows, 0)) {}

    void add_trial(const std::vector<ScatterSeries>& series) {
        double diff_sum = 0.0;
        int diff_count = 0;
        for (std::size_t r = 0; r < series.size() && r < static_cast<std::size_t>(top_n_); ++r) {
            for (int w = 0; w < n_windows_; ++w) {
                const double x = series[r].hub_change[w];
                const double y = series[r].successor_mean[w];
                if (!is_valid(x) || !is_valid(y)) continue;
                sum_hub_[r][w] += x;
                sum_succ_[r][w] += y;
                ++count_[r][w];
                diff_sum += y - x;
                ++diff_count;
            }
        }
        if (diff_count > 0) {
            const double d = diff_sum / diff_count;
            trial_diffs_.push_back(d);
        }
    }

    RandomScatterSummary finish(int trials) const {
        RandomScatterSummary s;
        s.top_n = top_n_;
        s.n_windows = n_windows_;
        s.trials = trials;
        s.mean_hub.assign(top_n_, std::vector<double>(n_windows_, kMissing));
        s.mean_successor.assign(top_n_, std::vector<double>(n_windows_, kMissing));
        s.point_trials.assign(top_n_, std::vector<int>(n_windows_, 0));
        for (int r = 0; r < top_n_; ++r) {
            for (int w = 0; w < n_windows_; ++w) {
                if (count_[r][w] == 0) continue;
                s.mean_hub[r][w] = sum_hub_[r][w] / count_[r][w];
                s.mean_successor[r][w] = sum_succ_[r][w] / count_[r][w];
                s.point_trials[r][w] = count_[r][w];
            }
        }
        s.grand_trials = static_cast<int>(trial_diffs_.size());
        if (!trial_diffs_.empty()) {
            s.grand_mean_diff = mean_of(trial_diffs_);
            if (trial_diffs_.size() >= 2) {
                s.grand_se_diff = std::sqrt(sample_variance(trial_diffs_) /
                                            static_cast<double>(trial_diffs_.size()));
            }
        }
        return s;
    }

private:
    int top_n_;
    int n_windows_;
    std::vector<std::vector<double>> sum_hub_;
    std::vector<std::vector<double>> sum_succ_;
    std::vector<std::vector<int>> count_;
    std::vector<double> trial_diffs_;
};

// Uniform simple directed graph with the given node and edge count, sampled
// as distinct ordered pairs without self-loops. Unit weights; the scatter
// never reads weights.
inline StockNetwork random_simple_digraph(const std::vector<std::string>& nodes, std::size_t edge_count, Rng& rng) {
    const std::uint64_t n = nodes.size();
    const std::uint64_t max_edges = n * (n - 1);
    if (edge_count > max_edges) throw std::invalid_argument("random_simple_digraph: too many edges");
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(edge_count * 2);
    std::vector<StockNetwork::Edge> edges;
    edges.reserve(edge_count);
    while (edges.size() < edge_count) {
        const std::uint64_t src = rng.below(n);
        const std::uint64_t dst = rng.below(n);
        if (src == dst) continue;
        const std::uint64_t key = src * n + dst;
        if (!chosen.insert(key).second) continue;
        edges.push_back({static_cast<int>(src), static_cast<int>(dst), 1});
    }
    return StockNetwork(nodes, std::move(edges));
}

} // namespace detail

// Experiment (1): rebuild a uniform random simple directed graph with the
// same node set and edge count each trial, recompute the scatter, average.
inline RandomScatterSummary random_experiment_edges(const StockNetwork& net,
                                                    const std::vector<WindowedChanges>& windowed,
                                                    std::size_t top_n, int trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("random_experiment_edges: trials must be >= 1");
    auto grid = detail::WindowGrid::build(windowed, net);
    detail::ScatterAccumulator acc(static_cast<int>(top_n), grid.n_windows);
    std::vector<int> identity(net.node_count());
    for (int i = 0; i < net.node_count(); ++i) identity[i] = i;
    for (int t = 0; t < trials; ++t) {
        Rng rng(derive_seed(seed, "random_experiment_edges", static_cast<std::uint64_t>(t)));
        auto random_net = detail::random_simple_digraph(net.nodes(), net.edge_count(), rng);
        acc.add_trial(detail::scatter_relabeled(random_net, grid, top_n, identity));
    }
    return acc.finish(trials);
}

// Experiment (2): keep the structure, apply a uniform random permutation to
// node labels each trial, recompute the scatter, average. The degree
// multiset is preserved exactly per trial.
inline RandomScatterSummary random_experiment_nodes(const StockNetwork& net,
                                                    const std::vector<WindowedChanges>& windowed,
                                                    std::size_t top_n, int trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("random_experiment_nodes: trials must be >= 1");
    auto grid = detail::WindowGrid::build(windowed, net);
    detail::ScatterAccumulator acc(static_cast<int>(top_n), grid.n_windows);
    std::vector<int> perm(net.node_count());
    for (int t = 0; t < trials; ++t) {
        Rng rng(derive_seed(seed, "random_experiment_nodes", static_cast<std::uint64_t>(t)));
        for (int i = 0; i < net.node_count(); ++i) perm[i] = i;
        rng.shuffle(perm);
        acc.add_trial(detail::scatter_relabeled(net, grid, top_n, perm));
    }
    return acc.finish(trials);
}

// Count of stocks at or beyond the daily down limit at each window end
// (change <= -limit + tolerance for price rounding).
struct LimitLockedCounts {
    std::vector<int> per_window;
    int active_stocks = 0;
};

inline LimitLockedCounts limit_locked_counts(const std::vector<WindowedChanges>& windowed,
                                             double limit = 0.10, double tolerance = 0.0005) {
    LimitLockedCounts out;
    if (windowed.empty()) return out;
    out.per_window.assign(windowed.front().values.size(), 0);
    for (const auto& s : windowed) {
        bool active = false;
        for (std::size_t w = 0; w < s.values.size(); ++w) {
            if (!is_valid(s.values[w])) continue;
            active = true;
            if (s.values[w] <= -(limit - tolerance)) ++out.per_window[w];
        }
        if (active) ++out.active_stocks;
    }
    return out;
}

} // namespace stocknet
