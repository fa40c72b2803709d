#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stocknet/bipartite.hpp"
#include "stocknet/config.hpp"
#include "stocknet/granger.hpp"
#include "stocknet/herding.hpp"
#include "stocknet/ingest.hpp"
#include "stocknet/metrics.hpp"
#include "stocknet/network.hpp"
#include "stocknet/timeseries.hpp"
#include "stocknet/version.hpp"

namespace stocknet {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct FileRef {
    std::string path;       // relative to output_dir for outputs
    std::string checksum;
};

struct StageRecord {
    std::string name;
    std::string status;     // completed | cached
    std::vector<FileRef> inputs;
    std::vector<FileRef> outputs;
    std::int64_t duration_ms = 0;
};

struct RunManifest {
    std::string tool_version;
    std::string config_hash;
    std::vector<StageRecord> stages;

    const StageRecord* find(const std::string& name) const {
        for (const auto& s : stages)
            if (s.name == name) return &s;
        return nullptr;
    }

    json to_json() const {
        json j;
        j["tool_version"] = tool_version;
        j["config_hash"] = config_hash;
        j["stages"] = json::array();
        for (const auto& s : stages) {
            json js;
            js["name"] = s.name;
            js["status"] = s.status;
            js["duration_ms"] = s.duration_ms;
            js["inputs"] = json::array();
            for (const auto& f : s.inputs) js["inputs"].push_back({{"path", f.path}, {"checksum", f.checksum}});
            js["outputs"] = json::array();
            for (const auto& f : s.outputs) js["outputs"].push_back({{"path", f.path}, {"checksum", f.checksum}});
            j["stages"].push_back(std::move(js));
        }
        return j;
    }

    static std::optional<RunManifest> load(const fs::path& path) {
        std::ifstream in(path);
        if (!in) return std::nullopt;
        json j;
        try {
            in >> j;
            RunManifest m;
            m.tool_version = j.at("tool_version").get<std::string>();
            m.config_hash = j.at("config_hash").get<std::string>();
            for (const auto& js : j.at("stages")) {
                StageRecord s;
                s.name = js.at("name").get<std::string>();
                s.status = js.at("status").get<std::string>();
                s.duration_ms = js.value("duration_ms", 0);
                for (const auto& f : js.at("inputs"))
                    s.inputs.push_back({f.at("path").get<std::string>(), f.at("checksum").get<std::string>()});
                for (const auto& f : js.at("outputs"))
                    s.outputs.push_back({f.at("path").get<std::string>(), f.at("checksum").get<std::string>()});
                m.stages.push_back(std::move(s));
            }
            return m;
        } catch (const std::exception&) {
            return std::nullopt;   // malformed manifest = no cache
        }
    }
};

inline std::string checksum_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot checksum missing file: " + path.string());
    Fnv1a64 h;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        h.update(std::string_view(buf, static_cast<std::size_t>(in.gcount())));
    }
    return hex64(h.digest());
}

namespace detail {

inline std::string csv_maybe(const MaybeValue& v) { return v.defined() ? fmt_double(*v.value) : std::string(); }

inline json json_maybe(const MaybeValue& v) {
    if (v.defined()) return *v.value;
    return nullptr;
}

inline void copy_file_bytes(const fs::path& from, const fs::path& to) {
    std::ifstream in(from, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + from.string());
    std::ofstream out(to, std::ios::binary);
    out << in.rdbuf();
}

// Appends the data rows of a CSV (everything after the header line).
inline void append_csv_rows(std::ofstream& out, const fs::path& from) {
    std::ifstream in(from, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + from.string());
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;
            continue;
        }
        out << line << '\n';
    }
}

} // namespace detail

// Executes the declarative pipeline: ingest -> network -> metrics ->
// herding -> timeseries -> causality -> report, with per-stage caching via
// input/output checksums recorded in the run manifest.
class Pipeline {
public:
    explicit Pipeline(RunConfig cfg) : cfg_(std::move(cfg)), out_(cfg_.output_dir) {
        calendar_ = cfg_.calendar();
        previous_ = RunManifest::load(out_ / "manifest.json");
        if (previous_ && previous_->config_hash != cfg_.config_hash()) previous_.reset();
        manifest_.tool_version = kVersion;
        manifest_.config_hash = cfg_.config_hash();
    }

    // Runs every configured stage and writes the manifest last.
    RunManifest run(std::ostream* log = nullptr) {
        log_ = log;
        fs::create_directories(out_);
        stage_ingest();
        stage_network();
        stage_metrics();
        if (!cfg_.skip_stages.contains("herding")) stage_herding();
        if (!cfg_.skip_stages.contains("timeseries"))
            for (const auto& d : cfg_.crash_dates) stage_timeseries(d);
        if (!cfg_.skip_stages.contains("causality"))
            for (const auto& d : cfg_.crash_dates) stage_causality(d);
        stage_report();
        write_manifest_();
        return manifest_;
    }

    // Re-emits the consolidated report bundle from existing stage outputs.
    RunManifest report_only(std::ostream* log = nullptr) {
        log_ = log;
        if (!fs::exists(out_ / "manifest.json"))
            throw std::runtime_error("no manifest under " + out_.string() + "; run the pipeline first");
        // keep prior stage records so the rewritten manifest stays complete
        if (previous_) manifest_.stages = previous_->stages;
        manifest_.stages.erase(
            std::remove_if(manifest_.stages.begin(), manifest_.stages.end(),
                           [](const StageRecord& s) { return s.name == "report"; }),
            manifest_.stages.end());
        stage_report();
        write_manifest_();
        return manifest_;
    }

    static constexpr int kReportFileCount = 18;

private:
    using Clock = std::chrono::steady_clock;

    void log_line_(const std::string& s) {
        if (log_) *log_ << s << '\n';
    }

    std::vector<FileRef> input_refs_(const std::vector<std::string>& paths) {
        std::vector<FileRef> refs;
        for (const auto& p : paths)
            if (!p.empty() && fs::exists(p)) refs.push_back({p, checksum_file(p)});
        return refs;
    }

    bool cache_valid_(const std::string& name, const std::vector<FileRef>& inputs) {
        if (!previous_) return false;
        const StageRecord* prev = previous_->find(name);
        if (!prev) return false;
        if (prev->inputs.size() != inputs.size()) return false;
        for (std::size_t i = 0; i < inputs.size(); ++i)
            if (prev->inputs[i].path != inputs[i].path || prev->inputs[i].checksum != inputs[i].checksum)
                return false;
        for (const auto& o : prev->outputs) {
            const fs::path p = out_ / o.path;
            if (!fs::exists(p) || checksum_file(p) != o.checksum) return false;
        }
        return true;
    }

    // Runs `body` writing each declared output to "<path>.partial", then
    // renames into place. On failure the partials stay for inspection.
    void run_stage_(const std::string& name, const std::vector<std::string>& input_paths,
                    const std::vector<std::string>& output_rel,
                    const std::function<void(const std::vector<fs::path>&)>& body) {
        auto inputs = input_refs_(input_paths);
        if (cache_valid_(name, inputs)) {
            StageRecord rec = *previous_->find(name);
            rec.status = "cached";
            manifest_.stages.push_back(std::move(rec));
            log_line_("[cached]    " + name);
            return;
        }
        const auto start = Clock::now();
        std::vector<fs::path> partials;
        for (const auto& rel : output_rel) {
            fs::path p = out_ / (rel + ".partial");
            fs::create_directories(p.parent_path());
            partials.push_back(std::move(p));
        }
        body(partials);
        StageRecord rec;
        rec.name = name;
        rec.status = "completed";
        rec.inputs = std::move(inputs);
        for (std::size_t i = 0; i < output_rel.size(); ++i) {
            fs::rename(partials[i], out_ / output_rel[i]);
            rec.outputs.push_back({output_rel[i], checksum_file(out_ / output_rel[i])});
        }
        rec.duration_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
        manifest_.stages.push_back(std::move(rec));
        log_line_("[completed] " + name + " (" + fmt_int(rec2_last_ms_()) + " ms)");
    }

    std::int64_t rec2_last_ms_() const { return manifest_.stages.back().duration_ms; }

    void write_manifest_() {
        std::ofstream out(out_ / "manifest.json", std::ios::binary);
        out << manifest_.to_json().dump(2) << '\n';
    }

    // ---- shared loaders ----------------------------------------------------

    std::vector<AggregatedHolding> load_snapshot_holdings_() {
        ParseReport report;
        auto records = parse_holdings((out_ / "ingest/normalized_holdings.csv").string(), report);
        std::vector<HoldingRecord> snapshot;
        for (auto& r : records)
            if (r.as_of_date == cfg_.snapshot_date) snapshot.push_back(std::move(r));
        if (snapshot.empty())
            throw std::runtime_error("no holdings for snapshot_date " + cfg_.snapshot_date);
        return aggregate_by_manager(snapshot);
    }

    StockNetwork load_net_() { return load_network((out_ / "network/stock_network.netart").string()); }

    EodTable load_eod_() {
        ParseReport report;
        return parse_end_of_day(cfg_.end_of_day, report);
    }

    // Change series for every usable stock on one date.
    ChangeSeriesMap load_changes_(const std::string& date, int* unusable = nullptr) {
        ParseReport report;
        EodTable eod = load_eod_();
        auto bars = parse_minute_bars(cfg_.minute_bars, calendar_, eod, report);
        ChangeSeriesMap changes;
        int bad = 0;
        for (const auto& s : bars) {
            if (s.trade_date != date) continue;
            if (!s.usable()) {
                ++bad;
                continue;
            }
            changes.emplace(s.stock_id, minute_changes(s));
        }
        if (unusable) *unusable = bad;
        return changes;
    }

    std::vector<WindowedChanges> windowed_changes_(const ChangeSeriesMap& changes) {
        std::vector<std::string> ids;
        ids.reserve(changes.size());
        for (const auto& [id, _] : changes) ids.push_back(id);
        std::sort(ids.begin(), ids.end());
        std::vector<WindowedChanges> out;
        out.reserve(ids.size());
        for (const auto& id : ids) out.push_back(window_last(changes.at(id), cfg_.window_minutes));
        return out;
    }

    // ---- stages ------------------------------------------------------------

    void stage_ingest() {
        std::vector<std::string> outputs = {"ingest/normalized_holdings.csv", "ingest/rejections_holdings.jsonl",
                                            "ingest/ingest_summary.json"};
        const bool have_prices = !cfg_.minute_bars.empty() && !cfg_.end_of_day.empty();
        if (have_prices) outputs.push_back("ingest/rejections_prices.jsonl");
        if (!cfg_.labels.empty() || !cfg_.market_values.empty()) outputs.push_back("ingest/rejections_labels.jsonl");

        run_stage_("ingest", {cfg_.holdings, cfg_.minute_bars, cfg_.end_of_day, cfg_.labels, cfg_.market_values},
                   outputs, [&](const std::vector<fs::path>& out) {
            ParseReport holdings_report;
            auto records = parse_holdings(cfg_.holdings, holdings_report);
            std::sort(records.begin(), records.end(), [](const HoldingRecord& a, const HoldingRecord& b) {
                return std::tie(a.as_of_date, a.manager_id, a.fund_id, a.stock_id) <
                       std::tie(b.as_of_date, b.manager_id, b.fund_id, b.stock_id);
            });
            {
                CsvWriter w(out[0].string());
                w.row({"fund_id", "manager_id", "stock_id", "market_value", "as_of_date"});
                for (const auto& r : records)
                    w.row({r.fund_id, r.manager_id, r.stock_id, format_cents(r.market_value), r.as_of_date});
            }
            holdings_report.write_log(out[1].string());

            json summary;
            summary["holdings"] = {{"accepted", holdings_report.accepted}, {"rejected", holdings_report.rejected}};
            Cents total = 0;
            for (const auto& r : records) total += r.market_value;
            summary["holdings"]["total_value_cents"] = total;

            std::size_t idx = 3;
            if (have_prices) {
                ParseReport price_report;
                EodTable eod = parse_end_of_day(cfg_.end_of_day, price_report);
                auto bars = parse_minute_bars(cfg_.minute_bars, calendar_, eod, price_report);
                price_report.write_log(out[idx++].string());
                std::map<std::string, std::array<std::size_t, 3>> by_date;   // series, unusable, fully_missing
                for (const auto& s : bars) {
                    auto& row = by_date[s.trade_date];
                    ++row[0];
                    if (!s.usable()) ++row[1];
                    if (s.fully_missing()) ++row[2];
                }
                json dates = json::object();
                for (const auto& [d, row] : by_date)
                    dates[d] = {{"series", row[0]}, {"unusable", row[1]}, {"fully_missing", row[2]}};
                summary["prices"] = {{"accepted_rows", price_report.accepted},
                                     {"rejected_rows", price_report.rejected},
                                     {"dates", dates}};
            }
            if (!cfg_.labels.empty() || !cfg_.market_values.empty()) {
                ParseReport label_report;
                std::size_t n_labels = 0, n_values = 0;
                if (!cfg_.labels.empty()) n_labels = parse_labels(cfg_.labels, label_report).size();
                if (!cfg_.market_values.empty()) n_values = parse_market_values(cfg_.market_values, label_report).size();
                label_report.write_log(out[idx++].string());
                summary["labels"] = {{"stock_labels", n_labels}, {"market_values", n_values},
                                     {"rejected_rows", label_report.rejected}};
            }
            std::ofstream js(out[2], std::ios::binary);
            js << summary.dump(2) << '\n';
        });
    }

    void stage_network() {
        run_stage_("network", {(out_ / "ingest/normalized_holdings.csv").string()},
                   {"network/stock_network.netart", "network/filter_sweep.csv", "network/network_build.json"},
                   [&](const std::vector<fs::path>& out) {
            auto aggregated = load_snapshot_holdings_();
            auto bipartite = build_bipartite(aggregated);
            const std::string source_hash = checksum_file(out_ / "ingest/normalized_holdings.csv");
            StockNetwork full = project(bipartite, source_hash);

            std::vector<double> ks;
            for (int i = 0; i <= 19; ++i) ks.push_back(0.05 * i);
            ks.push_back(0.99);
            auto sweep = filter_sweep(full, ks);
            {
                CsvWriter w(out[1].string());
                w.row({"k", "threshold_weight_cents", "ws_ratio", "lwcc_size", "edge_count"});
                for (const auto& p : sweep)
                    w.row({fmt_double(p.k), fmt_int(p.threshold_weight), fmt_double(p.ws_ratio),
                           fmt_int(p.lwcc_size), fmt_int(static_cast<std::int64_t>(p.edge_count))});
            }

            StockNetwork filtered = filter_edges(full, cfg_.filter_k);
            save_network(filtered, out[0].string());

            json j;
            j["snapshot_date"] = cfg_.snapshot_date;
            j["investors"] = bipartite.investor_count();
            j["stocks"] = bipartite.stock_count();
            j["bipartite_edges"] = bipartite.edge_count();
            j["prefilter_edges"] = full.edge_count();
            j["filter_k"] = cfg_.filter_k;
            j["filtered_edges"] = filtered.edge_count();
            std::ofstream js(out[2], std::ios::binary);
            js << j.dump(2) << '\n';
        });
    }

    void stage_metrics() {
        std::vector<std::string> outputs = {"metrics/summary.json",        "metrics/network_summary.csv",
                                            "metrics/degree_cdf.csv",      "metrics/degree_strength_scatter.csv",
                                            "metrics/degree_partition.csv", "metrics/rich_club_structure.csv"};
        if (!cfg_.market_values.empty()) outputs.push_back("metrics/group_feature_shares.csv");
        if (!cfg_.labels.empty()) {
            outputs.push_back("metrics/sector_composition.csv");
            outputs.push_back("metrics/style_composition.csv");
        }
        run_stage_("metrics",
                   {(out_ / "network/stock_network.netart").string(), cfg_.labels, cfg_.market_values},
                   outputs, [&](const std::vector<fs::path>& out) {
            StockNetwork net = load_net_();
            NetworkStats stats = compute_stats(net);
            DegreePartition partition = degree_partition(net);

            json j;
            j["snapshot_date"] = cfg_.snapshot_date;
            j["node_count"] = stats.node_count;
            j["edge_count"] = stats.edge_count;
            j["density"] = stats.density;
            j["avg_out_degree"] = stats.avg_degree;
            j["in_assortativity"] = detail::json_maybe(stats.in_assortativity);
            j["out_assortativity"] = detail::json_maybe(stats.out_assortativity);
            if (!stats.in_assortativity.defined()) j["in_assortativity_reason"] = stats.in_assortativity.reason;
            if (!stats.out_assortativity.defined()) j["out_assortativity_reason"] = stats.out_assortativity.reason;
            j["weight_mean"] = stats.weight_mean;
            j["weight_std"] = stats.weight_std;
            j["weight_sum"] = stats.weight_sum;
            j["n_scc"] = stats.n_scc;
            j["n_wcc"] = stats.n_wcc;
            j["max_scc_size"] = stats.max_scc_size;
            j["max_wcc_size"] = stats.max_wcc_size;
            j["degree_thresholds"] = {{"D0.3", partition.thresholds[0]},
                                      {"D0.6", partition.thresholds[1]},
                                      {"D0.9", partition.thresholds[2]}};
            json sizes = json::object();
            for (int g = 0; g < DegreePartition::kGroups; ++g)
                sizes[DegreePartition::label(g)] = partition.group_size(g);
            j["group_sizes"] = sizes;
            json top = json::array();
            for (int v : net.top_by_out_degree(static_cast<std::size_t>(cfg_.top_n))) top.push_back(net.nodes()[v]);
            j["top_out_degree"] = top;
            {
                std::ofstream js(out[0], std::ios::binary);
                js << j.dump(2) << '\n';
            }
            {
                CsvWriter w(out[1].string());
                w.row({"snapshot_date", "density", "node_count", "edge_count", "in_assortativity",
                       "out_assortativity", "avg_out_degree", "weight_mean", "weight_std", "weight_sum",
                       "n_scc", "n_wcc", "max_scc_size", "max_wcc_size"});
                w.row({cfg_.snapshot_date, fmt_double(stats.density), fmt_int(stats.node_count),
                       fmt_int(static_cast<std::int64_t>(stats.edge_count)),
                       detail::csv_maybe(stats.in_assortativity), detail::csv_maybe(stats.out_assortativity),
                       fmt_double(stats.avg_degree), fmt_double(stats.weight_mean), fmt_double(stats.weight_std),
                       fmt_double(stats.weight_sum), fmt_int(stats.n_scc), fmt_int(stats.n_wcc),
                       fmt_int(stats.max_scc_size), fmt_int(stats.max_wcc_size)});
            }
            {
                CsvWriter w(out[2].string());
                w.row({"mode", "degree", "cdf"});
                for (auto mode : {DegreeMode::Out, DegreeMode::In})
                    for (const auto& [d, c] : degree_cdf(net, mode))
                        w.row({mode == DegreeMode::Out ? "out" : "in", fmt_int(d), fmt_double(c)});
            }
            {
                CsvWriter w(out[3].string());
                w.row({"mode", "node", "degree", "strength", "other_degree"});
                for (auto mode : {DegreeMode::Out, DegreeMode::In})
                    for (const auto& r : degree_strength_scatter(net, mode))
                        w.row({mode == DegreeMode::Out ? "out" : "in", r.node, fmt_int(r.degree),
                               fmt_double(r.strength), fmt_int(r.other_degree)});
            }
            {
                CsvWriter w(out[4].string());
                w.row({"node", "group", "out_degree"});
                for (int v = 0; v < net.node_count(); ++v)
                    w.row({net.nodes()[v], DegreePartition::label(partition.group_of[v]),
                           fmt_int(net.out_degree(v))});
            }
            {
                std::vector<int> rs;
                for (int r = 1; r <= std::min(cfg_.rich_club_max_r, net.node_count()); ++r) rs.push_back(r);
                CsvWriter w(out[5].string());
                w.row({"r", "e", "density_rr"});
                for (const auto& p : rich_club_curve(net, rs))
                    w.row({fmt_int(p.r), fmt_int(static_cast<std::int64_t>(p.e)),
                           detail::csv_maybe(p.density_rr)});
            }
            std::size_t idx = 6;
            if (!cfg_.market_values.empty()) {
                ParseReport r;
                auto values = parse_market_values(cfg_.market_values, r);
                auto shares = group_feature_shares(net, partition, values);
                CsvWriter w(out[idx++].string());
                w.row({"group", "out_degree_share", "out_strength_share", "market_value_share", "node_share"});
                for (const auto& row : shares.rows)
                    w.row({row.group, fmt_double(row.out_degree_share), fmt_double(row.out_strength_share),
                           fmt_double(row.market_value_share), fmt_double(row.node_share)});
            }
            if (!cfg_.labels.empty()) {
                ParseReport r;
                auto labels = parse_labels(cfg_.labels, r);
                for (auto axis : {LabelAxis::Sector, LabelAxis::Style}) {
                    auto rep = composition_report(net, partition, labels, axis);
                    CsvWriter w(out[idx++].string());
                    std::vector<std::string> header = {"category"};
                    for (int g = 0; g < DegreePartition::kGroups; ++g) {
                        header.push_back(std::string(DegreePartition::label(g)) + "_count");
                        header.push_back(std::string(DegreePartition::label(g)) + "_share");
                    }
                    header.push_back("total");
                    w.row(header);
                    for (const auto& row : rep.rows) {
                        std::vector<std::string> fields = {row.category};
                        for (int g = 0; g < DegreePartition::kGroups; ++g) {
                            fields.push_back(fmt_int(row.counts[g]));
                            fields.push_back(fmt_double(row.total > 0
                                                            ? static_cast<double>(row.counts[g]) / row.total
                                                            : 0.0));
                        }
                        fields.push_back(fmt_int(row.total));
                        w.row(fields);
                    }
                }
            }
        });
    }

    void stage_herding() {
        run_stage_("herding",
                   {(out_ / "ingest/normalized_holdings.csv").string(),
                    (out_ / "network/stock_network.netart").string(), cfg_.end_of_day},
                   {"herding/herding_heatmap.csv", "herding/herding_ttests.csv", "herding/entropy_loss.csv",
                    "herding/top_institutions.csv"},
                   [&](const std::vector<fs::path>& out) {
            auto aggregated = load_snapshot_holdings_();
            auto bipartite = build_bipartite(aggregated);
            StockNetwork net = load_net_();
            DegreePartition partition = degree_partition(net);
            HerdingMatrix matrix = herding_matrices(bipartite, partition, net);

            {
                CsvWriter w(out[0].string());
                w.row({"institution", "group", "metric", "value"});
                for (std::size_t m = 0; m < matrix.institutions.size(); ++m) {
                    for (int g = 0; g < DegreePartition::kGroups; ++g) {
                        w.row({matrix.institutions[m], DegreePartition::label(g), "count_share",
                               matrix.group_empty[g] ? "" : fmt_double(matrix.cells_count[m][g])});
                        w.row({matrix.institutions[m], DegreePartition::label(g), "avg_value",
                               matrix.group_empty[g] ? "" : fmt_double(matrix.cells_value[m][g])});
                    }
                }
            }
            {
                CsvWriter w(out[1].string());
                w.row({"matrix", "group_low", "group_high", "t_stat", "p_value", "n_pairs", "note"});
                for (bool value_matrix : {false, true}) {
                    for (const auto& t : adjacent_group_tests(matrix, value_matrix)) {
                        w.row({value_matrix ? "avg_value" : "count_share", t.group_low, t.group_high,
                               detail::csv_maybe(t.t_stat), detail::csv_maybe(t.p_value),
                               fmt_int(static_cast<std::int64_t>(t.n_pairs)),
                               t.t_stat.defined() ? "" : t.t_stat.reason});
                    }
                }
            }
            {
                EodTable eod = load_eod_();
                std::vector<std::unordered_map<std::string, double>> daily_changes;
                for (const auto& date : cfg_.crash_dates) {
                    std::unordered_map<std::string, double> d;
                    for (const auto& stock : bipartite.stocks()) {
                        const double today = eod.close_on(stock, date);
                        const double prev = eod.prev_close(stock, date);
                        if (std::isfinite(today) && std::isfinite(prev) && prev > 0.0)
                            d[stock] = (today - prev) / prev;
                    }
                    daily_changes.push_back(std::move(d));
                }
                CsvWriter w(out[2].string());
                w.row({"institution", "entropy", "date", "absolute_loss", "stocks_used", "stocks_missing"});
                for (int m = 0; m < bipartite.investor_count(); ++m) {
                    const double entropy = portfolio_entropy(bipartite, m);
                    for (std::size_t di = 0; di < cfg_.crash_dates.size(); ++di) {
                        auto loss = absolute_loss(bipartite, m, daily_changes[di]);
                        w.row({bipartite.investors()[m], fmt_double(entropy), cfg_.crash_dates[di],
                               fmt_double(loss.loss), fmt_int(loss.stocks_used), fmt_int(loss.stocks_missing)});
                    }
                }
            }
            {
                // institutions investing the most per stock in the top group
                struct Row {
                    std::string institution;
                    double avg_value;
                    int held;
                    double share;
                    int total_held;
                };
                std::vector<Row> rows;
                const int top_size = partition.group_size(DegreePartition::Top);
                for (int m = 0; m < bipartite.investor_count(); ++m) {
                    int held = 0, total_held = 0;
                    Cents value = 0;
                    for (const auto& h : bipartite.holdings_of(m)) {
                        ++total_held;
                        const int node = net.node_index(bipartite.stocks()[h.stock]);
                        if (node < 0) continue;
                        if (partition.group_of[node] == DegreePartition::Top) {
                            ++held;
                            value += h.value;
                        }
                    }
                    if (held == 0) continue;
                    rows.push_back({bipartite.investors()[m], cents_to_units(value) / held, held,
                                    top_size > 0 ? static_cast<double>(held) / top_size : 0.0, total_held});
                }
                std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
                    return a.avg_value != b.avg_value ? a.avg_value > b.avg_value : a.institution < b.institution;
                });
                if (rows.size() > 5) rows.resize(5);
                CsvWriter w(out[3].string());
                w.row({"institution", "avg_value_per_stock_top_group", "stocks_held_top_group",
                       "share_of_top_group", "total_stocks_held"});
                for (const auto& r : rows)
                    w.row({r.institution, fmt_double(r.avg_value), fmt_int(r.held), fmt_double(r.share),
                           fmt_int(r.total_held)});
            }
        });
    }

    void stage_timeseries(const std::string& date) {
        const std::string dir = "timeseries/" + date + "/";
        run_stage_("timeseries:" + date,
                   {(out_ / "network/stock_network.netart").string(), cfg_.minute_bars, cfg_.end_of_day},
                   {dir + "group_window_means.csv", dir + "hub_successor_scatter.csv",
                    dir + "random_experiment_scatter.csv", dir + "random_summary.json",
                    dir + "limit_locked.csv"},
                   [&](const std::vector<fs::path>& out) {
            StockNetwork net = load_net_();
            DegreePartition partition = degree_partition(net);
            int unusable = 0;
            auto changes = load_changes_(date, &unusable);
            auto windowed = windowed_changes_(changes);
            const int wm = cfg_.window_minutes;
            auto window_end = [&](int w) { return calendar_.label_of((w + 1) * wm - 1); };

            auto table = group_mean_changes(windowed, net, partition);
            {
                CsvWriter w(out[0].string());
                w.row({"date", "window", "window_end", "group", "mean_change", "stocks"});
                for (int wi = 0; wi < table.n_windows; ++wi)
                    for (int g = 0; g < DegreePartition::kGroups; ++g)
                        w.row({date, fmt_int(wi), window_end(wi), DegreePartition::label(g),
                               is_valid(table.means[wi][g]) ? fmt_double(table.means[wi][g]) : "",
                               fmt_int(table.counts[wi][g])});
            }
            auto scatter = hub_successor_scatter(net, windowed, static_cast<std::size_t>(cfg_.top_n));
            {
                CsvWriter w(out[1].string());
                w.row({"date", "hub", "window", "window_end", "hub_change", "successor_mean", "successors"});
                for (const auto& s : scatter)
                    for (std::size_t wi = 0; wi < s.hub_change.size(); ++wi) {
                        if (!is_valid(s.hub_change[wi]) || !is_valid(s.successor_mean[wi])) continue;
                        w.row({date, s.hub_id, fmt_int(static_cast<std::int64_t>(wi)),
                               window_end(static_cast<int>(wi)), fmt_double(s.hub_change[wi]),
                               fmt_double(s.successor_mean[wi]), fmt_int(s.successor_count)});
                    }
            }
            const std::uint64_t seed_edges = derive_seed(cfg_.seed, "timeseries/" + date + "/edges");
            const std::uint64_t seed_nodes = derive_seed(cfg_.seed, "timeseries/" + date + "/nodes");
            auto edges_exp = random_experiment_edges(net, windowed, static_cast<std::size_t>(cfg_.top_n),
                                                     cfg_.trials, seed_edges);
            auto nodes_exp = random_experiment_nodes(net, windowed, static_cast<std::size_t>(cfg_.top_n),
                                                     cfg_.trials, seed_nodes);
            {
                CsvWriter w(out[2].string());
                w.row({"date", "experiment", "rank", "window", "window_end", "mean_hub_change",
                       "mean_successor_change", "trials_with_point"});
                auto emit = [&](const char* name, const RandomScatterSummary& s) {
                    for (int r = 0; r < s.top_n; ++r)
                        for (int wi = 0; wi < s.n_windows; ++wi) {
                            if (s.point_trials[r][wi] == 0) continue;
                            w.row({date, name, fmt_int(r), fmt_int(wi), window_end(wi),
                                   fmt_double(s.mean_hub[r][wi]), fmt_double(s.mean_successor[r][wi]),
                                   fmt_int(s.point_trials[r][wi])});
                        }
                };
                emit("edges", edges_exp);
                emit("nodes", nodes_exp);
            }
            {
                json j;
                j["date"] = date;
                j["trials"] = cfg_.trials;
                j["usable_stocks"] = changes.size();
                j["unusable_stocks"] = unusable;
                for (auto [name, s] : {std::pair<const char*, const RandomScatterSummary*>{"edges", &edges_exp},
                                       {"nodes", &nodes_exp}}) {
                    j[name] = {{"grand_mean_diff", s->grand_mean_diff},
                               {"grand_se_diff", s->grand_se_diff},
                               {"trials_with_points", s->grand_trials}};
                }
                std::ofstream js(out[3], std::ios::binary);
                js << j.dump(2) << '\n';
            }
            {
                auto locked = limit_locked_counts(windowed);
                CsvWriter w(out[4].string());
                w.row({"date", "window", "window_end", "locked_count", "active_stocks"});
                for (std::size_t wi = 0; wi < locked.per_window.size(); ++wi)
                    w.row({date, fmt_int(static_cast<std::int64_t>(wi)), window_end(static_cast<int>(wi)),
                           fmt_int(locked.per_window[wi]), fmt_int(locked.active_stocks)});
            }
        });
    }

    void stage_causality(const std::string& date) {
        const std::string dir = "causality/" + date + "/";
        run_stage_("causality:" + date,
                   {(out_ / "network/stock_network.netart").string(), cfg_.minute_bars, cfg_.end_of_day},
                   {dir + "outcomes.csv", dir + "summary.json"},
                   [&](const std::vector<fs::path>& out) {
            StockNetwork net = load_net_();
            auto changes = load_changes_(date);

            std::vector<std::pair<std::string, std::string>> pairs;
            pairs.reserve(net.edge_count());
            for (const auto& e : net.edges())
                pairs.emplace_back(net.nodes()[e.src], net.nodes()[e.dst]);
            auto run = run_pairs(pairs, changes, cfg_.granger, cfg_.workers);

            {
                CsvWriter w(out[0].string());
                w.row({"source", "target", "date", "status", "lag", "wald", "p", "reject"});
                for (const auto& o : run.outcomes) {
                    if (o.tested()) {
                        w.row({o.source, o.target, date, o.status_text(), fmt_int(o.lag_m),
                               fmt_double(o.wald_stat), fmt_double(o.p_value), o.reject ? "true" : "false"});
                    } else {
                        w.row({o.source, o.target, date, o.status_text(), "", "", "", ""});
                    }
                }
            }

            WeightPartition wp = weight_partition(net);
            auto bins = ratio_by_weight_bin(run.outcomes, net, wp);
            auto hubs = ratio_for_hubs(run.outcomes, net, static_cast<std::size_t>(cfg_.top_n));
            auto avg = average_level(changes, cfg_.granger, cfg_.granger_sample_pairs,
                                     derive_seed(cfg_.seed, "causality/" + date + "/avg"), cfg_.workers,
                                     cfg_.granger_exhaustive);
            std::vector<int> rs;
            for (int r = 1; r <= std::min(cfg_.rich_club_max_r, net.node_count()); ++r) rs.push_back(r);
            auto curve = rich_club_curve(net, rs);
            rich_club_granger(run.outcomes, net, curve);

            json j;
            j["date"] = date;
            j["alpha"] = cfg_.granger.alpha;
            j["max_lag"] = cfg_.granger.max_lag;
            j["d_max"] = cfg_.granger.d_max;
            j["lag_criterion"] = cfg_.granger.lag_criterion == LagCriterion::Aic ? "aic" : "bic";
            j["min_valid_points"] = cfg_.granger.min_valid_points;
            j["pairs"] = run.outcomes.size();
            j["tested"] = run.tested;
            j["skipped"] = run.skipped;
            j["weight_thresholds"] = {{"W0.4", wp.thresholds[0]},
                                      {"W0.7", wp.thresholds[1]},
                                      {"W0.9", wp.thresholds[2]}};
            j["average_level"] = {{"sampled", avg.sampled},          {"tested", avg.tested},
                                  {"rejected", avg.rejected},        {"ratio", detail::json_maybe(avg.ratio)},
                                  {"standard_error", avg.standard_error}, {"exhaustive", avg.exhaustive}};
            json jbins = json::array();
            for (const auto& b : bins)
                jbins.push_back({{"bin", b.label},
                                 {"tested", b.tested},
                                 {"rejected", b.rejected},
                                 {"skipped", b.skipped},
                                 {"ratio", detail::json_maybe(b.ratio)}});
            j["weight_bins"] = jbins;
            json jhubs = json::array();
            for (const auto& h : hubs)
                jhubs.push_back({{"hub", h.hub},
                                 {"tested", h.tested},
                                 {"rejected", h.rejected},
                                 {"skipped", h.skipped},
                                 {"ratio", detail::json_maybe(h.ratio)}});
            j["hubs"] = jhubs;
            json jclub = json::array();
            for (const auto& p : curve)
                jclub.push_back({{"r", p.r},
                                 {"e", p.e},
                                 {"density_rr", detail::json_maybe(p.density_rr)},
                                 {"granger_density", detail::json_maybe(p.granger_density)}});
            j["rich_club"] = jclub;
            std::ofstream js(out[1], std::ios::binary);
            js << j.dump(2) << '\n';
        });
    }

    void stage_report() {
        const bool have_labels = !cfg_.labels.empty();
        const bool have_values = !cfg_.market_values.empty();
        const bool have_herding = !cfg_.skip_stages.contains("herding");
        const bool have_timeseries = !cfg_.skip_stages.contains("timeseries");
        const bool have_causality = !cfg_.skip_stages.contains("causality");

        std::vector<std::string> inputs = {(out_ / "metrics/network_summary.csv").string(),
                                           (out_ / "metrics/degree_cdf.csv").string(),
                                           (out_ / "metrics/degree_strength_scatter.csv").string(),
                                           (out_ / "metrics/rich_club_structure.csv").string(),
                                           (out_ / "network/filter_sweep.csv").string()};
        if (have_values) inputs.push_back((out_ / "metrics/group_feature_shares.csv").string());
        if (have_labels) {
            inputs.push_back((out_ / "metrics/sector_composition.csv").string());
            inputs.push_back((out_ / "metrics/style_composition.csv").string());
        }
        if (have_herding)
            for (const char* f : {"herding_heatmap.csv", "herding_ttests.csv", "entropy_loss.csv",
                                  "top_institutions.csv"})
                inputs.push_back((out_ / "herding" / f).string());
        if (have_timeseries)
            for (const auto& d : cfg_.crash_dates)
                for (const char* f : {"group_window_means.csv", "hub_successor_scatter.csv",
                                      "random_experiment_scatter.csv", "limit_locked.csv"})
                    inputs.push_back((out_ / "timeseries" / d / f).string());
        if (have_causality)
            for (const auto& d : cfg_.crash_dates)
                inputs.push_back((out_ / "causality" / d / "summary.json").string());

        std::vector<std::string> outputs;
        auto add = [&](const std::string& f) { outputs.push_back("reports/" + f); };
        add("network_summary.csv");
        add("filter_sweep.csv");
        add("degree_cdf.csv");
        add("degree_strength_scatter.csv");
        add("rich_club.csv");
        if (have_values) add("group_feature_shares.csv");
        if (have_labels) {
            add("sector_composition.csv");
            add("style_composition.csv");
        }
        if (have_herding) {
            add("herding_heatmap.csv");
            add("herding_ttests.csv");
            add("entropy_loss.csv");
            add("top_institutions.csv");
        }
        if (have_timeseries) {
            add("group_window_means.csv");
            add("hub_successor_scatter.csv");
            add("random_experiment_scatter.csv");
            add("limit_locked_counts.csv");
        }
        if (have_causality) {
            add("weight_bin_granger.csv");
            add("hub_granger_summary.csv");
        }
        add("index.json");

        run_stage_("report", inputs, outputs, [&](const std::vector<fs::path>& out) {
            std::size_t idx = 0;
            auto next = [&]() { return out[idx++]; };

            detail::copy_file_bytes(out_ / "metrics/network_summary.csv", next());
            detail::copy_file_bytes(out_ / "network/filter_sweep.csv", next());
            detail::copy_file_bytes(out_ / "metrics/degree_cdf.csv", next());
            detail::copy_file_bytes(out_ / "metrics/degree_strength_scatter.csv", next());

            {
                // structural curve, one granger-density column per crash date
                std::ifstream structural(out_ / "metrics/rich_club_structure.csv");
                std::map<std::string, std::map<int, MaybeValue>> granger;   // date -> r -> density
                if (have_causality) {
                    for (const auto& d : cfg_.crash_dates) {
                        std::ifstream in(out_ / "causality" / d / "summary.json");
                        json j;
                        in >> j;
                        for (const auto& p : j.at("rich_club")) {
                            const int r = p.at("r").get<int>();
                            if (p.at("granger_density").is_null())
                                granger[d][r] = MaybeValue::undefined("");
                            else
                                granger[d][r] = MaybeValue::of(p.at("granger_density").get<double>());
                        }
                    }
                }
                std::ofstream w(next(), std::ios::binary);
                w << "r,e,density_rr";
                for (const auto& d : cfg_.crash_dates)
                    if (have_causality) w << ",granger_density_" << d;
                w << '\n';
                std::string line;
                std::getline(structural, line);   // header
                while (std::getline(structural, line)) {
                    if (line.empty()) continue;
                    w << line;
                    const int r = std::stoi(line.substr(0, line.find(',')));
                    for (const auto& d : cfg_.crash_dates) {
                        if (!have_causality) continue;
                        w << ',';
                        auto it = granger.find(d);
                        if (it != granger.end()) {
                            auto jt = it->second.find(r);
                            if (jt != it->second.end() && jt->second.defined()) w << fmt_double(*jt->second.value);
                        }
                    }
                    w << '\n';
                }
            }

            if (have_values) detail::copy_file_bytes(out_ / "metrics/group_feature_shares.csv", next());
            if (have_labels) {
                detail::copy_file_bytes(out_ / "metrics/sector_composition.csv", next());
                detail::copy_file_bytes(out_ / "metrics/style_composition.csv", next());
            }
            if (have_herding)
                for (const char* f : {"herding_heatmap.csv", "herding_ttests.csv", "entropy_loss.csv",
                                      "top_institutions.csv"})
                    detail::copy_file_bytes(out_ / "herding" / f, next());

            if (have_timeseries) {
                struct Concat {
                    const char* file;
                    const char* header;
                };
                for (const auto& [file, header] :
                     {Concat{"group_window_means.csv", "date,window,window_end,group,mean_change,stocks"},
                      Concat{"hub_successor_scatter.csv",
                             "date,hub,window,window_end,hub_change,successor_mean,successors"},
                      Concat{"random_experiment_scatter.csv",
                             "date,experiment,rank,window,window_end,mean_hub_change,mean_successor_change,"
                             "trials_with_point"},
                      Concat{"limit_locked.csv", "date,window,window_end,locked_count,active_stocks"}}) {
                    std::ofstream w(next(), std::ios::binary);
                    w << header << '\n';
                    for (const auto& d : cfg_.crash_dates)
                        detail::append_csv_rows(w, out_ / "timeseries" / d / file);
                }
            }

            if (have_causality) {
                std::vector<json> summaries;
                for (const auto& d : cfg_.crash_dates) {
                    std::ifstream in(out_ / "causality" / d / "summary.json");
                    json j;
                    in >> j;
                    summaries.push_back(std::move(j));
                }
                {
                    std::ofstream w(next(), std::ios::binary);
                    w << "date,bin,tested,rejected,skipped,ratio\n";
                    for (const auto& j : summaries)
                        for (const auto& b : j.at("weight_bins")) {
                            w << j.at("date").get<std::string>() << ',' << b.at("bin").get<std::string>() << ','
                              << b.at("tested").get<std::uint64_t>() << ',' << b.at("rejected").get<std::uint64_t>()
                              << ',' << b.at("skipped").get<std::uint64_t>() << ',';
                            if (!b.at("ratio").is_null()) w << fmt_double(b.at("ratio").get<double>());
                            w << '\n';
                        }
                }
                {
                    std::ofstream w(next(), std::ios::binary);
                    w << "date,entity,tested,rejected,ratio,standard_error\n";
                    for (const auto& j : summaries) {
                        const auto& avg = j.at("average_level");
                        w << j.at("date").get<std::string>() << ",average_level,"
                          << avg.at("tested").get<std::uint64_t>() << ',' << avg.at("rejected").get<std::uint64_t>()
                          << ',';
                        if (!avg.at("ratio").is_null()) w << fmt_double(avg.at("ratio").get<double>());
                        w << ',' << fmt_double(avg.at("standard_error").get<double>()) << '\n';
                        for (const auto& h : j.at("hubs")) {
                            w << j.at("date").get<std::string>() << ',' << h.at("hub").get<std::string>() << ','
                              << h.at("tested").get<std::uint64_t>() << ',' << h.at("rejected").get<std::uint64_t>()
                              << ',';
                            if (!h.at("ratio").is_null()) w << fmt_double(h.at("ratio").get<double>());
                            w << ",\n";
                        }
                    }
                }
            }

            {
                json index;
                index["tool_version"] = kVersion;
                index["snapshot_date"] = cfg_.snapshot_date;
                json files = json::array();
                for (std::size_t i = 0; i + 1 < outputs.size(); ++i)
                    files.push_back(fs::path(outputs[i]).filename().string());
                index["files"] = files;
                json omitted = json::array();
                if (!have_values)
                    omitted.push_back({{"file", "group_feature_shares.csv"}, {"reason", "no market_values input"}});
                if (!have_labels) {
                    omitted.push_back({{"file", "sector_composition.csv"}, {"reason", "no labels input"}});
                    omitted.push_back({{"file", "style_composition.csv"}, {"reason", "no labels input"}});
                }
                if (!have_herding)
                    omitted.push_back({{"file", "herding reports"}, {"reason", "herding stage skipped"}});
                if (!have_timeseries)
                    omitted.push_back({{"file", "timeseries reports"}, {"reason", "timeseries stage skipped"}});
                if (!have_causality)
                    omitted.push_back(
                        {{"file", "weight_bin_granger.csv, hub_granger_summary.csv, rich_club granger columns"},
                         {"reason", "causality stage skipped"}});
                index["omitted"] = omitted;
                std::ofstream w(next(), std::ios::binary);
                w << index.dump(2) << '\n';
            }
        });
    }

    RunConfig cfg_;
    fs::path out_;
    SessionCalendar calendar_;
    RunManifest manifest_;
    std::optional<RunManifest> previous_;
    std::ostream* log_ = nullptr;
};

} // namespace stocknet
