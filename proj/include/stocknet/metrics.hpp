#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "stocknet/ingest.hpp"
#include "stocknet/network.hpp"
#include "stocknet/stats.hpp"

namespace stocknet {

enum class DegreeMode { In, Out };

struct NetworkStats {
    int node_count = 0;
    std::size_t edge_count = 0;
    double density = 0.0;
    double avg_degree = 0.0;        // edges / nodes, i.e. average out-degree
    MaybeValue in_assortativity;
    MaybeValue out_assortativity;
    double weight_mean = 0.0;       // in currency units
    double weight_std = 0.0;        // population convention
    double weight_sum = 0.0;
    int n_scc = 0;
    int n_wcc = 0;
    int max_scc_size = 0;
    int max_wcc_size = 0;
};

namespace detail {

// Iterative Tarjan; returns component id per node plus component count.
inline std::pair<std::vector<int>, int> strongly_connected_components(const StockNetwork& net) {
    const int n = net.node_count();
    std::vector<int> comp(n, -1), low(n, 0), disc(n, -1), stack_mem;
    std::vector<bool> on_stack(n, false);
    stack_mem.reserve(n);
    int timer = 0, ncomp = 0;

    struct Frame {
        int node;
        std::size_t child;
    };
    std::vector<Frame> call;
    for (int start = 0; start < n; ++start) {
        if (disc[start] != -1) continue;
        call.push_back({start, 0});
        while (!call.empty()) {
            auto& [u, child] = call.back();
            if (child == 0) {
                disc[u] = low[u] = timer++;
                stack_mem.push_back(u);
                on_stack[u] = true;
            }
            auto succ = net.successors(u);
            if (child < succ.size()) {
                int v = succ[child++];
                if (disc[v] == -1) {
                    call.push_back({v, 0});
                } else if (on_stack[v]) {
                    low[u] = std::min(low[u], disc[v]);
                }
            } else {
                if (low[u] == disc[u]) {
                    while (true) {
                        int w = stack_mem.back();
                        stack_mem.pop_back();
                        on_stack[w] = false;
                        comp[w] = ncomp;
                        if (w == u) break;
                    }
                    ++ncomp;
                }
                int u_done = u;
                call.pop_back();
                if (!call.empty()) {
                    int parent = call.back().node;
                    low[parent] = std::min(low[parent], low[u_done]);
                }
            }
        }
    }
    return {std::move(comp), ncomp};
}

inline std::pair<std::vector<int>, int> weakly_connected_components(const StockNetwork& net) {
    const int n = net.node_count();
    std::vector<int> parent(n), size(n, 1);
    for (int i = 0; i < n; ++i) parent[i] = i;
    auto find = [&](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (const auto& e : net.edges()) {
        int a = find(e.src), b = find(e.dst);
        if (a == b) continue;
        if (size[a] < size[b]) std::swap(a, b);
        parent[b] = a;
        size[a] += size[b];
    }
    std::vector<int> comp(n, -1);
    int ncomp = 0;
    std::unordered_map<int, int> root_to_comp;
    for (int i = 0; i < n; ++i) {
        int r = find(i);
        auto [it, inserted] = root_to_comp.try_emplace(r, ncomp);
        if (inserted) ++ncomp;
        comp[i] = it->second;
    }
    return {std::move(comp), ncomp};
}

} // namespace detail

// Pearson correlation over ordered edges of (mode-degree of source,
// mode-degree of target). Undefined when either endpoint sequence has zero
// variance.
inline MaybeValue assortativity(const StockNetwork& net, DegreeMode mode) {
    if (net.edge_count() < 2) return MaybeValue::undefined("fewer than 2 edges");
    std::vector<double> xs, ys;
    xs.reserve(net.edge_count());
    ys.reserve(net.edge_count());
    auto deg = [&](int v) {
        return static_cast<double>(mode == DegreeMode::Out ? net.out_degree(v) : net.in_degree(v));
    };
    for (const auto& e : net.edges()) {
        xs.push_back(deg(e.src));
        ys.push_back(deg(e.dst));
    }
    return pearson(xs, ys);
}

inline NetworkStats compute_stats(const StockNetwork& net) {
    if (net.node_count() == 0) throw std::invalid_argument("compute_stats: empty network");
    NetworkStats s;
    s.node_count = net.node_count();
    s.edge_count = net.edge_count();
    const double n = static_cast<double>(s.node_count);
    s.density = n > 1 ? static_cast<double>(s.edge_count) / (n * (n - 1.0)) : 0.0;
    s.avg_degree = static_cast<double>(s.edge_count) / n;
    s.in_assortativity = assortativity(net, DegreeMode::In);
    s.out_assortativity = assortativity(net, DegreeMode::Out);

    if (s.edge_count > 0) {
        std::vector<double> w;
        w.reserve(s.edge_count);
        for (const auto& e : net.edges()) w.push_back(cents_to_units(e.weight));
        s.weight_mean = mean_of(w);
        s.weight_std = std::sqrt(population_variance(w));
        double sum = 0.0;
        for (double x : w) sum += x;
        s.weight_sum = sum;
    }

    auto [scc, nscc] = detail::strongly_connected_components(net);
    auto [wcc, nwcc] = detail::weakly_connected_components(net);
    s.n_scc = nscc;
    s.n_wcc = nwcc;
    std::vector<int> scc_size(nscc, 0), wcc_size(nwcc, 0);
    for (int c : scc) ++scc_size[c];
    for (int c : wcc) ++wcc_size[c];
    s.max_scc_size = nscc ? *std::max_element(scc_size.begin(), scc_size.end()) : 0;
    s.max_wcc_size = nwcc ? *std::max_element(wcc_size.begin(), wcc_size.end()) : 0;
    return s;
}

// Out-degree quantile partition with the five groups used throughout the
// herding and return analyses. Thresholds are nearest-rank quantiles of the
// positive out-degree sequence.
struct DegreePartition {
    enum Group : int { Zero = 0, Q1 = 1, Q2 = 2, Q3 = 3, Top = 4 };
    static constexpr int kGroups = 5;

    std::array<int, 3> thresholds{};   // D_0.3, D_0.6, D_0.9
    std::vector<int> group_of;         // per node index
    std::array<std::vector<int>, kGroups> members;

    static const char* label(int g) {
        static const char* labels[kGroups] = {
            "d=0", "0<d<=D0.3", "D0.3<d<=D0.6", "D0.6<d<=D0.9", "D0.9<d"};
        return labels[g];
    }

    int group_size(int g) const { return static_cast<int>(members[g].size()); }
};

inline DegreePartition degree_partition(const StockNetwork& net) {
    std::vector<int> positive;
    for (int v = 0; v < net.node_count(); ++v)
        if (net.out_degree(v) > 0) positive.push_back(net.out_degree(v));
    if (positive.empty()) throw std::invalid_argument("degree_partition: all out-degrees are zero");
    std::sort(positive.begin(), positive.end());

    DegreePartition p;
    p.thresholds = {nearest_rank(positive, 0.3), nearest_rank(positive, 0.6), nearest_rank(positive, 0.9)};
    p.group_of.resize(net.node_count());
    for (int v = 0; v < net.node_count(); ++v) {
        const int d = net.out_degree(v);
        int g;
        if (d == 0) g = DegreePartition::Zero;
        else if (d <= p.thresholds[0]) g = DegreePartition::Q1;
        else if (d <= p.thresholds[1]) g = DegreePartition::Q2;
        else if (d <= p.thresholds[2]) g = DegreePartition::Q3;
        else g = DegreePartition::Top;
        p.group_of[v] = g;
        p.members[g].push_back(v);
    }
    return p;
}

// Per-group shares of total out-degree, out-strength, market value and node
// count. Nodes lacking a market value are excluded from that column (and
// counted in excluded_nodes); every column sums to 1 over what it covers.
struct GroupFeatureShares {
    struct Row {
        std::string group;
        double out_degree_share = 0.0;
        double out_strength_share = 0.0;
        double market_value_share = 0.0;
        double node_share = 0.0;
    };
    std::vector<Row> rows;
    std::vector<std::string> excluded_nodes;   // missing market value
};

inline GroupFeatureShares group_feature_shares(const StockNetwork& net, const DegreePartition& partition,
                                               const std::unordered_map<std::string, Cents>& market_values) {
    std::array<double, DegreePartition::kGroups> deg{}, strength{}, value{}, count{};
    double deg_total = 0, strength_total = 0, value_total = 0, count_total = 0;
    GroupFeatureShares out;
    for (int v = 0; v < net.node_count(); ++v) {
        const int g = partition.group_of[v];
        deg[g] += net.out_degree(v);
        strength[g] += cents_to_units(net.out_strength(v));
        count[g] += 1;
        deg_total += net.out_degree(v);
        strength_total += cents_to_units(net.out_strength(v));
        count_total += 1;
        auto it = market_values.find(net.nodes()[v]);
        if (it == market_values.end()) {
            out.excluded_nodes.push_back(net.nodes()[v]);
        } else {
            value[g] += cents_to_units(it->second);
            value_total += cents_to_units(it->second);
        }
    }
    for (int g = 0; g < DegreePartition::kGroups; ++g) {
        GroupFeatureShares::Row r;
        r.group = DegreePartition::label(g);
        r.out_degree_share = deg_total > 0 ? deg[g] / deg_total : 0.0;
        r.out_strength_share = strength_total > 0 ? strength[g] / strength_total : 0.0;
        r.market_value_share = value_total > 0 ? value[g] / value_total : 0.0;
        r.node_share = count_total > 0 ? count[g] / count_total : 0.0;
        out.rows.push_back(std::move(r));
    }
    return out;
}

// Counts and row-proportions of stocks per (category, group) cell, where the
// category axis is sector or style. Unlabeled network nodes get their own row.
struct CompositionReport {
    struct Row {
        std::string category;
        std::array<int, DegreePartition::kGroups> counts{};
        int total = 0;
    };
    std::vector<Row> rows;        // sorted by category, "unlabeled" last
    std::array<int, DegreePartition::kGroups> group_sizes{};
};

enum class LabelAxis { Sector, Style };

inline CompositionReport composition_report(const StockNetwork& net, const DegreePartition& partition,
                                            const std::vector<StockLabel>& labels, LabelAxis axis) {
    std::unordered_map<std::string, std::string> label_of;
    for (const auto& l : labels)
        label_of[l.stock_id] = axis == LabelAxis::Sector ? l.sector : l.style;

    std::map<std::string, CompositionReport::Row> rows;
    CompositionReport out;
    int labeled_any = 0;
    for (int v = 0; v < net.node_count(); ++v) {
        const int g = partition.group_of[v];
        ++out.group_sizes[g];
        auto it = label_of.find(net.nodes()[v]);
        const bool labeled = it != label_of.end() && !it->second.empty();
        if (labeled) ++labeled_any;
        const std::string key = labeled ? it->second : std::string("unlabeled");
        auto& row = rows[key];
        row.category = key;
        ++row.counts[g];
        ++row.total;
    }
    if (labeled_any == 0) throw std::invalid_argument("composition_report: labels cover no node");
    for (auto& [key, row] : rows)
        if (key != "unlabeled") out.rows.push_back(row);
    if (auto it = rows.find("unlabeled"); it != rows.end()) out.rows.push_back(it->second);
    return out;
}

// One point of the rich-club curve: the induced subgraph over the top r
// nodes by out-degree (ties broken by node id ascending).
struct RichClubPoint {
    int r = 0;
    std::size_t e = 0;                        // edges inside the induced subgraph
    MaybeValue density_rr;                    // e / (r*(r-1))
    MaybeValue granger_density;               // filled by the causality module
};

inline std::vector<RichClubPoint> rich_club_curve(const StockNetwork& net, const std::vector<int>& r_values) {
    for (int r : r_values)
        if (r < 0 || r > net.node_count()) throw std::invalid_argument("rich_club_curve: r out of range");
    const int max_r = r_values.empty() ? 0 : *std::max_element(r_values.begin(), r_values.end());
    std::vector<int> top = net.top_by_out_degree(static_cast<std::size_t>(max_r));
    std::vector<int> rank_of(net.node_count(), -1);
    for (std::size_t i = 0; i < top.size(); ++i) rank_of[top[i]] = static_cast<int>(i);

    std::vector<RichClubPoint> out;
    out.reserve(r_values.size());
    for (int r : r_values) {
        RichClubPoint p;
        p.r = r;
        for (int i = 0; i < r; ++i) {
            for (int succ : net.successors(top[i]))
                if (rank_of[succ] >= 0 && rank_of[succ] < r) ++p.e;
        }
        if (r >= 2) {
            p.density_rr = MaybeValue::of(static_cast<double>(p.e) /
                                          (static_cast<double>(r) * (r - 1.0)));
        } else {
            p.density_rr = MaybeValue::undefined("r < 2");
        }
        p.granger_density = MaybeValue::undefined("not computed");
        out.push_back(std::move(p));
    }
    return out;
}

// Degree/strength table for the degree-correlation bubble plots: one row per
// node of (mode degree, mode strength, other-mode degree). Zero-out-degree
// nodes are omitted in out mode.
struct DegreeStrengthRow {
    std::string node;
    int degree = 0;
    double strength = 0.0;
    int other_degree = 0;
};

inline std::vector<DegreeStrengthRow> degree_strength_scatter(const StockNetwork& net, DegreeMode mode) {
    std::vector<DegreeStrengthRow> out;
    for (int v = 0; v < net.node_count(); ++v) {
        const int d = mode == DegreeMode::Out ? net.out_degree(v) : net.in_degree(v);
        if (mode == DegreeMode::Out && d == 0) continue;
        DegreeStrengthRow r;
        r.node = net.nodes()[v];
        r.degree = d;
        r.strength = cents_to_units(mode == DegreeMode::Out ? net.out_strength(v) : net.in_strength(v));
        r.other_degree = mode == DegreeMode::Out ? net.in_degree(v) : net.out_degree(v);
        out.push_back(std::move(r));
    }
    return out;
}

// Empirical CDF of the in- or out-degree sequence: (degree, P(D <= degree)).
inline std::vector<std::pair<int, double>> degree_cdf(const StockNetwork& net, DegreeMode mode) {
    std::map<int, int> counts;
    for (int v = 0; v < net.node_count(); ++v)
        ++counts[mode == DegreeMode::Out ? net.out_degree(v) : net.in_degree(v)];
    std::vector<std::pair<int, double>> out;
    double cum = 0.0;
    const double n = static_cast<double>(net.node_count());
    for (const auto& [d, c] : counts) {
        cum += c;
        out.emplace_back(d, cum / n);
    }
    return out;
}

} // namespace stocknet
