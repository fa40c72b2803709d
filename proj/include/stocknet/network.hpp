#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "stocknet/bipartite.hpp"
#include "stocknet/checksum.hpp"
#include "stocknet/format.hpp"
#include "stocknet/money.hpp"
#include "stocknet/stats.hpp"

namespace stocknet {

// Directed weighted stock network. Node ids are sorted; edges are sorted
// lexicographically by (source, target) index, so identical inputs always
// produce identical artifacts. Isolated nodes are part of the node set.
class StockNetwork {
public:
    struct Edge {
        int src;
        int dst;
        Cents weight;
    };

    struct Metadata {
        double filter_k = 0.0;
        std::string source_hash;   // hex digest of the holdings the graph came from
    };

    StockNetwork() = default;
    StockNetwork(std::vector<std::string> nodes, std::vector<Edge> edges)
        : StockNetwork(std::move(nodes), std::move(edges), Metadata{}) {}
    StockNetwork(std::vector<std::string> nodes, std::vector<Edge> edges, Metadata meta)
        : nodes_(std::move(nodes)), edges_(std::move(edges)), meta_(std::move(meta)) {
        for (std::size_t i = 0; i < nodes_.size(); ++i) node_index_[nodes_[i]] = static_cast<int>(i);
        std::sort(edges_.begin(), edges_.end(),
                  [](const Edge& a, const Edge& b) { return a.src != b.src ? a.src < b.src : a.dst < b.dst; });
        for (const auto& e : edges_) {
            if (e.src == e.dst) throw std::invalid_argument("self-loop in stock network");
            if (e.src < 0 || e.dst < 0 || e.src >= node_count() || e.dst >= node_count())
                throw std::invalid_argument("edge endpoint out of range");
        }
        build_adjacency_();
    }

    int node_count() const { return static_cast<int>(nodes_.size()); }
    std::size_t edge_count() const { return edges_.size(); }
    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const Metadata& metadata() const { return meta_; }

    int node_index(const std::string& id) const {
        auto it = node_index_.find(id);
        return it == node_index_.end() ? -1 : it->second;
    }

    // Successors of a node (targets of its out-edges), index-sorted.
    std::span<const int> successors(int node) const {
        return {succ_.data() + out_offsets_[node], succ_.data() + out_offsets_[node + 1]};
    }
    std::span<const Cents> successor_weights(int node) const {
        return {succ_w_.data() + out_offsets_[node], succ_w_.data() + out_offsets_[node + 1]};
    }

    int out_degree(int node) const { return out_offsets_[node + 1] - out_offsets_[node]; }
    int in_degree(int node) const { return in_degree_[node]; }
    Cents out_strength(int node) const { return out_strength_[node]; }
    Cents in_strength(int node) const { return in_strength_[node]; }

    // Nodes ranked by out-degree descending, ties by node index ascending.
    std::vector<int> top_by_out_degree(std::size_t n) const {
        std::vector<int> order(nodes_.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::stable_sort(order.begin(), order.end(), [this](int a, int b) {
            int da = out_degree(a), db = out_degree(b);
            return da != db ? da > db : a < b;
        });
        if (order.size() > n) order.resize(n);
        return order;
    }

private:
    void build_adjacency_() {
        const int n = node_count();
        out_offsets_.assign(n + 1, 0);
        in_degree_.assign(n, 0);
        out_strength_.assign(n, 0);
        in_strength_.assign(n, 0);
        for (const auto& e : edges_) {
            ++out_offsets_[e.src + 1];
            ++in_degree_[e.dst];
            out_strength_[e.src] += e.weight;
            in_strength_[e.dst] += e.weight;
        }
        for (int i = 0; i < n; ++i) out_offsets_[i + 1] += out_offsets_[i];
        succ_.resize(edges_.size());
        succ_w_.resize(edges_.size());
        std::vector<int> cursor(out_offsets_.begin(), out_offsets_.end() - 1);
        for (const auto& e : edges_) {
            succ_[cursor[e.src]] = e.dst;
            succ_w_[cursor[e.src]] = e.weight;
            ++cursor[e.src];
        }
    }

    std::vector<std::string> nodes_;
    std::vector<Edge> edges_;
    Metadata meta_;
    std::unordered_map<std::string, int> node_index_;
    std::vector<int> out_offsets_;
    std::vector<int> succ_;
    std::vector<Cents> succ_w_;
    std::vector<int> in_degree_;
    std::vector<Cents> out_strength_;
    std::vector<Cents> in_strength_;
};

// Builds the bipartite graph from aggregated holdings (thin alias that keeps
// the operation surface explicit).
inline BipartiteGraph build_bipartite(const std::vector<AggregatedHolding>& holdings) {
    return BipartiteGraph::from_holdings(holdings);
}

// Projects the bipartite graph onto the directed weighted stock network:
// for every ordered stock pair (i, j) sharing at least one investor,
// w_ij = sum over common investors m of the value m holds in i.
//
// Iterates investors and accumulates the s*(s-1) ordered-pair contributions
// of each holding list of size s, which is O(sum s^2) instead of an all-pairs
// scan. Accumulation is dense when the stock universe is small enough for an
// n*n int64 matrix, sparse otherwise.
inline StockNetwork project(const BipartiteGraph& b, std::string source_hash = {}) {
    const int n = b.stock_count();
    std::vector<StockNetwork::Edge> edges;
    constexpr int kDenseLimit = 5000;   // 5000^2 * 8B = 200 MB

    if (n <= kDenseLimit) {
        std::vector<Cents> acc(static_cast<std::size_t>(n) * n, 0);
        for (int m = 0; m < b.investor_count(); ++m) {
            auto hs = b.holdings_of(m);
            for (const auto& hi : hs) {
                Cents* row = acc.data() + static_cast<std::size_t>(hi.stock) * n;
                for (const auto& hj : hs) row[hj.stock] += hi.value;
                row[hi.stock] -= hi.value;   // undo the self contribution
            }
        }
        for (int i = 0; i < n; ++i) {
            const Cents* row = acc.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j)
                if (row[j] > 0) edges.push_back({i, j, row[j]});
        }
    } else {
        std::unordered_map<std::uint64_t, Cents> acc;
        acc.reserve(1 << 20);
        for (int m = 0; m < b.investor_count(); ++m) {
            auto hs = b.holdings_of(m);
            for (const auto& hi : hs) {
                const std::uint64_t base = static_cast<std::uint64_t>(hi.stock) << 32;
                for (const auto& hj : hs) {
                    if (hj.stock == hi.stock) continue;
                    acc[base | static_cast<std::uint32_t>(hj.stock)] += hi.value;
                }
            }
        }
        edges.reserve(acc.size());
        for (const auto& [key, w] : acc)
            edges.push_back({static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu), w});
    }

    StockNetwork::Metadata meta;
    meta.filter_k = 0.0;
    meta.source_hash = std::move(source_hash);
    return StockNetwork(b.stocks(), std::move(edges), std::move(meta));
}

// Removes edges whose weight is strictly below the nearest-rank 100*k-th
// percentile of the pre-filter weight sequence; ties at the threshold
// survive. Nodes are retained even when isolated.
inline StockNetwork filter_edges(const StockNetwork& net, double k) {
    if (k < 0.0 || k >= 1.0) throw std::invalid_argument("filter_edges: k must be in [0,1)");
    if (net.node_count() == 0 || net.edge_count() == 0)
        throw std::invalid_argument("filter_edges: empty network");

    std::vector<StockNetwork::Edge> kept;
    if (k == 0.0) {
        kept = net.edges();
    } else {
        std::vector<Cents> weights;
        weights.reserve(net.edge_count());
        for (const auto& e : net.edges()) weights.push_back(e.weight);
        std::sort(weights.begin(), weights.end());
        const Cents threshold = nearest_rank(weights, k);
        for (const auto& e : net.edges())
            if (e.weight >= threshold) kept.push_back(e);
    }
    StockNetwork::Metadata meta = net.metadata();
    meta.filter_k = k;
    return StockNetwork(net.nodes(), std::move(kept), std::move(meta));
}

struct FilterSweepPoint {
    double k = 0.0;
    Cents threshold_weight = 0;   // the 100*k-th percentile weight W(k)
    double ws_ratio = 1.0;        // WS(k) / WS(0)
    int lwcc_size = 0;            // largest weakly connected component
    std::size_t edge_count = 0;
};

namespace detail {

// Union-find over node indices; returns the size of the largest component
// formed by the given edges (singletons count).
inline int largest_weak_component(int n, const std::vector<StockNetwork::Edge>& edges) {
    std::vector<int> parent(n), size(n, 1);
    for (int i = 0; i < n; ++i) parent[i] = i;
    auto find = [&](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (const auto& e : edges) {
        int a = find(e.src), b = find(e.dst);
        if (a == b) continue;
        if (size[a] < size[b]) std::swap(a, b);
        parent[b] = a;
        size[a] += size[b];
    }
    int best = n > 0 ? 1 : 0;
    for (int i = 0; i < n; ++i)
        if (parent[i] == i) best = std::max(best, size[i]);
    return best;
}

} // namespace detail

// Evaluates the weight-quantile filter at each k independently (the sweep is
// not cumulative). ks must be sorted ascending.
inline std::vector<FilterSweepPoint> filter_sweep(const StockNetwork& net, const std::vector<double>& ks) {
    if (!std::is_sorted(ks.begin(), ks.end())) throw std::invalid_argument("filter_sweep: ks must be ascending");
    std::vector<Cents> weights;
    weights.reserve(net.edge_count());
    double total_weight = 0.0;
    for (const auto& e : net.edges()) {
        weights.push_back(e.weight);
        total_weight += static_cast<double>(e.weight);
    }
    std::sort(weights.begin(), weights.end());

    std::vector<FilterSweepPoint> out;
    out.reserve(ks.size());
    for (double k : ks) {
        FilterSweepPoint p;
        p.k = k;
        if (weights.empty()) {
            out.push_back(p);
            continue;
        }
        const Cents threshold = k == 0.0 ? weights.front() : nearest_rank(weights, k);
        p.threshold_weight = threshold;
        std::vector<StockNetwork::Edge> kept;
        double kept_weight = 0.0;
        for (const auto& e : net.edges()) {
            if (k == 0.0 || e.weight >= threshold) {
                kept.push_back(e);
                kept_weight += static_cast<double>(e.weight);
            }
        }
        p.edge_count = kept.size();
        p.ws_ratio = total_weight > 0.0 ? kept_weight / total_weight : 1.0;
        p.lwcc_size = detail::largest_weak_component(net.node_count(), kept);
        out.push_back(p);
    }
    return out;
}

// Network artifact: text header (node_count, edge_count, k, source hash,
// content checksum) followed by the node list and the edge CSV. The checksum
// covers everything after its own line; save/load round-trips byte-stably.
inline void save_network(const StockNetwork& net, const std::string& path) {
    std::ostringstream body;
    body << "nodes\n";
    for (const auto& id : net.nodes()) body << id << '\n';
    body << "source,target,weight_cents\n";
    for (const auto& e : net.edges())
        body << net.nodes()[e.src] << ',' << net.nodes()[e.dst] << ',' << fmt_int(e.weight) << '\n';
    const std::string body_str = body.str();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write network artifact: " + path);
    out << "stocknet-network v1\n";
    out << "node_count " << net.node_count() << '\n';
    out << "edge_count " << net.edge_count() << '\n';
    out << "k " << fmt_double(net.metadata().filter_k) << '\n';
    out << "source_hash " << (net.metadata().source_hash.empty() ? "-" : net.metadata().source_hash) << '\n';
    out << "checksum " << hex64(fnv1a64(body_str)) << '\n';
    out << body_str;
}

inline StockNetwork load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open network artifact: " + path);
    std::string line;
    auto read_line = [&]() {
        if (!std::getline(in, line)) throw std::runtime_error("truncated network artifact: " + path);
        if (!line.empty() && line.back() == '\r') line.pop_back();
    };
    read_line();
    if (line != "stocknet-network v1") throw std::runtime_error("not a network artifact: " + path);

    auto field = [&](const std::string& key) {
        read_line();
        if (line.rfind(key + " ", 0) != 0) throw std::runtime_error("bad artifact header (" + key + "): " + path);
        return line.substr(key.size() + 1);
    };
    std::int64_t node_count, edge_count;
    if (!parse_int64(field("node_count"), node_count)) throw std::runtime_error("bad node_count: " + path);
    if (!parse_int64(field("edge_count"), edge_count)) throw std::runtime_error("bad edge_count: " + path);
    double k;
    if (!parse_double(field("k"), k)) throw std::runtime_error("bad k: " + path);
    std::string source_hash = field("source_hash");
    std::string checksum = field("checksum");

    std::ostringstream rest;
    rest << in.rdbuf();
    const std::string body = rest.str();
    if (hex64(fnv1a64(body)) != checksum)
        throw std::runtime_error("checksum mismatch in network artifact: " + path);

    std::istringstream bs(body);
    auto body_line = [&]() {
        if (!std::getline(bs, line)) throw std::runtime_error("truncated artifact body: " + path);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    if (body_line() != "nodes") throw std::runtime_error("bad artifact body: " + path);
    std::vector<std::string> nodes;
    nodes.reserve(node_count);
    std::unordered_map<std::string, int> index;
    for (std::int64_t i = 0; i < node_count; ++i) {
        nodes.push_back(body_line());
        index[nodes.back()] = static_cast<int>(i);
    }
    if (body_line() != "source,target,weight_cents") throw std::runtime_error("bad edge header: " + path);
    std::vector<StockNetwork::Edge> edges;
    edges.reserve(edge_count);
    for (std::int64_t i = 0; i < edge_count; ++i) {
        auto fields = split_csv_line(body_line());
        if (fields.size() != 3) throw std::runtime_error("bad edge row: " + path);
        auto s = index.find(fields[0]);
        auto t = index.find(fields[1]);
        std::int64_t w;
        if (s == index.end() || t == index.end() || !parse_int64(fields[2], w))
            throw std::runtime_error("bad edge row: " + path);
        edges.push_back({s->second, t->second, w});
    }
    StockNetwork::Metadata meta;
    meta.filter_k = k;
    meta.source_hash = source_hash == "-" ? "" : source_hash;
    return StockNetwork(std::move(nodes), std::move(edges), std::move(meta));
}

} // namespace stocknet
