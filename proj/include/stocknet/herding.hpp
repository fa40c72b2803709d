#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "stocknet/bipartite.hpp"
#include "stocknet/metrics.hpp"
#include "stocknet/stats.hpp"

namespace stocknet {

// Per-institution investment pattern over the five out-degree groups.
// cells_count: fraction of the group's stocks the institution holds.
// cells_value: average held market value per held stock in the group
// (currency units), 0 when the institution holds nothing there.
struct HerdingMatrix {
    std::vector<std::string> institutions;   // row order, see herding_matrices
    std::vector<std::array<double, DegreePartition::kGroups>> cells_count;
    std::vector<std::array<double, DegreePartition::kGroups>> cells_value;
    std::array<bool, DegreePartition::kGroups> group_empty{};

    std::vector<double> count_column(int g) const {
        std::vector<double> col;
        col.reserve(cells_count.size());
        for (const auto& row : cells_count) col.push_back(row[g]);
        return col;
    }
    std::vector<double> value_column(int g) const {
        std::vector<double> col;
        col.reserve(cells_value.size());
        for (const auto& row : cells_value) col.push_back(row[g]);
        return col;
    }
};

// Rows are ordered by the institution's average per-stock value in the top
// out-degree group, ascending, so the heaviest top-group investors sit at
// the bottom of the emitted heatmap. Ties fall back to the institution id.
inline HerdingMatrix herding_matrices(const BipartiteGraph& b, const DegreePartition& partition,
                                      const StockNetwork& net) {
    const int ni = b.investor_count();
    std::vector<std::array<int, DegreePartition::kGroups>> held_count(
        ni, std::array<int, DegreePartition::kGroups>{});
    std::vector<std::array<Cents, DegreePartition::kGroups>> held_value(
        ni, std::array<Cents, DegreePartition::kGroups>{});

    for (int m = 0; m < ni; ++m) {
        for (const auto& h : b.holdings_of(m)) {
            const int node = net.node_index(b.stocks()[h.stock]);
            if (node < 0) continue;   // stock absent from the network snapshot
            const int g = partition.group_of[node];
            ++held_count[m][g];
            held_value[m][g] += h.value;
        }
    }

    HerdingMatrix out;
    for (int g = 0; g < DegreePartition::kGroups; ++g) out.group_empty[g] = partition.group_size(g) == 0;

    std::vector<int> order(ni);
    for (int m = 0; m < ni; ++m) order[m] = m;
    auto top_value = [&](int m) {
        const int c = held_count[m][DegreePartition::Top];
        return c > 0 ? cents_to_units(held_value[m][DegreePartition::Top]) / c : 0.0;
    };
    std::stable_sort(order.begin(), order.end(), [&](int a, int bi) {
        const double va = top_value(a), vb = top_value(bi);
        if (va != vb) return va < vb;
        return b.investors()[a] < b.investors()[bi];
    });

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int m : order) {
        out.institutions.push_back(b.investors()[m]);
        std::array<double, DegreePartition::kGroups> cc{}, cv{};
        for (int g = 0; g < DegreePartition::kGroups; ++g) {
            if (out.group_empty[g]) {
                cc[g] = nan;
                cv[g] = nan;
                continue;
            }
            cc[g] = static_cast<double>(held_count[m][g]) / partition.group_size(g);
            cv[g] = held_count[m][g] > 0 ? cents_to_units(held_value[m][g]) / held_count[m][g] : 0.0;
        }
        out.cells_count.push_back(cc);
        out.cells_value.push_back(cv);
    }
    return out;
}

// The four adjacent-group comparisons for one matrix, each a one-tailed
// paired t test of H1: lower-degree column < higher-degree column.
inline std::vector<PairedTestResult> adjacent_group_tests(const HerdingMatrix& m, bool value_matrix) {
    std::vector<PairedTestResult> out;
    for (int g = 0; g + 1 < DegreePartition::kGroups; ++g) {
        if (m.group_empty[g] || m.group_empty[g + 1]) {
            PairedTestResult r;
            r.group_low = DegreePartition::label(g);
            r.group_high = DegreePartition::label(g + 1);
            r.n_pairs = m.institutions.size();
            r.t_stat = r.p_value = MaybeValue::undefined("empty group");
            out.push_back(std::move(r));
            continue;
        }
        auto low = value_matrix ? m.value_column(g) : m.count_column(g);
        auto high = value_matrix ? m.value_column(g + 1) : m.count_column(g + 1);
        auto r = paired_one_tailed_t(low, high);
        r.group_low = DegreePartition::label(g);
        r.group_high = DegreePartition::label(g + 1);
        out.push_back(std::move(r));
    }
    return out;
}

// Shannon entropy (nats) of one institution's holding-weight distribution.
inline double portfolio_entropy(const BipartiteGraph& b, int investor) {
    auto hs = b.holdings_of(investor);
    if (hs.empty() || b.investor_total(investor) <= 0)
        throw std::invalid_argument("portfolio_entropy: investor holds nothing");
    std::vector<double> w;
    w.reserve(hs.size());
    for (const auto& h : hs) w.push_back(static_cast<double>(h.value));
    return shannon_entropy(w);
}

// |sum_i h_mi * d_i| where d_i is the stock's daily net percentage change.
// Stocks without a change value are excluded and counted.
struct AbsoluteLossResult {
    double loss = 0.0;           // currency units
    int stocks_used = 0;
    int stocks_missing = 0;
};

inline AbsoluteLossResult absolute_loss(const BipartiteGraph& b, int investor,
                                        const std::unordered_map<std::string, double>& daily_net_changes) {
    AbsoluteLossResult r;
    double acc = 0.0;
    for (const auto& h : b.holdings_of(investor)) {
        auto it = daily_net_changes.find(b.stocks()[h.stock]);
        if (it == daily_net_changes.end() || !std::isfinite(it->second)) {
            ++r.stocks_missing;
            continue;
        }
        acc += cents_to_units(h.value) * it->second;
        ++r.stocks_used;
    }
    r.loss = std::abs(acc);
    return r;
}

} // namespace stocknet
