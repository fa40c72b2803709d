#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "stocknet/ingest.hpp"
#include "stocknet/money.hpp"

namespace stocknet {

// Weighted bipartite graph between fund-management companies and stocks.
// Vertex sets are exactly the ids appearing in the aggregated holdings;
// every edge weight is positive. Stored CSR-style per investor.
class BipartiteGraph {
public:
    struct Holding {
        int stock;      // index into stocks()
        Cents value;    // held market value
    };

    static BipartiteGraph from_holdings(const std::vector<AggregatedHolding>& holdings) {
        if (holdings.empty()) throw std::invalid_argument("bipartite graph needs at least one holding");
        BipartiteGraph g;
        std::map<std::string, std::vector<std::pair<std::string, Cents>>> by_investor;
        std::map<std::string, Cents> stock_totals;
        for (const auto& h : holdings) {
            if (h.market_value <= 0) throw std::invalid_argument("aggregated holding must be positive");
            by_investor[h.manager_id].emplace_back(h.stock_id, h.market_value);
            stock_totals[h.stock_id] += h.market_value;
        }
        g.stocks_.reserve(stock_totals.size());
        for (const auto& [id, total] : stock_totals) {
            g.stock_index_[id] = static_cast<int>(g.stocks_.size());
            g.stocks_.push_back(id);
            g.stock_fund_value_.push_back(total);
        }
        for (auto& [investor, list] : by_investor) {
            g.investor_index_[investor] = static_cast<int>(g.investors_.size());
            g.investors_.push_back(investor);
            g.offsets_.push_back(static_cast<int>(g.holdings_.size()));
            std::sort(list.begin(), list.end());
            Cents total = 0;
            for (const auto& [stock, value] : list) {
                int si = g.stock_index_.at(stock);
                // (manager, stock) uniqueness is an input invariant; merge defensively
                if (!g.holdings_.empty() && g.holdings_.size() > static_cast<std::size_t>(g.offsets_.back()) &&
                    g.holdings_.back().stock == si) {
                    g.holdings_.back().value += value;
                } else {
                    g.holdings_.push_back({si, value});
                }
                total += value;
            }
            g.investor_total_.push_back(total);
        }
        g.offsets_.push_back(static_cast<int>(g.holdings_.size()));
        return g;
    }

    int investor_count() const { return static_cast<int>(investors_.size()); }
    int stock_count() const { return static_cast<int>(stocks_.size()); }
    std::size_t edge_count() const { return holdings_.size(); }

    const std::vector<std::string>& investors() const { return investors_; }
    const std::vector<std::string>& stocks() const { return stocks_; }

    std::span<const Holding> holdings_of(int investor) const {
        return {holdings_.data() + offsets_[investor],
                holdings_.data() + offsets_[investor + 1]};
    }

    // Total fund-held value of a stock (sum of h over all investors).
    Cents stock_fund_value(int stock) const { return stock_fund_value_[stock]; }
    // Portfolio size s_j of an investor.
    Cents investor_total(int investor) const { return investor_total_[investor]; }

    int stock_index(const std::string& id) const {
        auto it = stock_index_.find(id);
        return it == stock_index_.end() ? -1 : it->second;
    }
    int investor_index(const std::string& id) const {
        auto it = investor_index_.find(id);
        return it == investor_index_.end() ? -1 : it->second;
    }

private:
    std::vector<std::string> investors_;         // sorted
    std::vector<std::string> stocks_;            // sorted
    std::unordered_map<std::string, int> investor_index_;
    std::unordered_map<std::string, int> stock_index_;
    std::vector<int> offsets_;                   // investor CSR offsets
    std::vector<Holding> holdings_;
    std::vector<Cents> stock_fund_value_;
    std::vector<Cents> investor_total_;
};

} // namespace stocknet
