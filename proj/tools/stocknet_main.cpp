// stocknet command-line driver: full pipeline runs plus direct per-stage
// entry points for partial work.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stocknet/config.hpp"
#include "stocknet/pipeline.hpp"
#include "stocknet/synth.hpp"
#include "stocknet/version.hpp"

namespace {

using namespace stocknet;

int print_findings(const std::vector<Finding>& findings) {
    for (const auto& f : findings) {
        std::cerr << (f.severity == Finding::Severity::Error ? "error: " : "warning: ") << f.message << '\n';
    }
    return has_errors(findings) ? 1 : 0;
}

RunConfig load_validated_config(const std::string& path, int workers_override) {
    std::vector<std::string> unknown;
    RunConfig cfg = parse_config(path, &unknown);
    if (workers_override > 0) cfg.workers = workers_override;
    auto findings = validate(cfg, unknown);
    if (print_findings(findings) != 0) throw std::runtime_error("config validation failed");
    return cfg;
}

GrangerConfig granger_from_flags(double alpha, int max_lag, int dmax, int min_points, const std::string& criterion) {
    GrangerConfig g;
    g.alpha = alpha;
    g.max_lag = max_lag;
    g.d_max = dmax;
    g.min_valid_points = min_points;
    if (criterion == "aic") g.lag_criterion = LagCriterion::Aic;
    else if (criterion == "bic") g.lag_criterion = LagCriterion::Bic;
    else throw std::runtime_error("lag criterion must be aic or bic");
    return g;
}

ChangeSeriesMap changes_for_date(const std::string& bars_path, const std::string& eod_path,
                                 const SessionCalendar& calendar, const std::string& date) {
    ParseReport report;
    EodTable eod = parse_end_of_day(eod_path, report);
    auto bars = parse_minute_bars(bars_path, calendar, eod, report);
    ChangeSeriesMap changes;
    for (const auto& s : bars) {
        if (s.trade_date != date || !s.usable()) continue;
        changes.emplace(s.stock_id, minute_changes(s));
    }
    return changes;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stocknet: investor-stock network analytics"};
    app.set_version_flag("--version", std::string(stocknet::kVersion));
    app.require_subcommand(1);

    std::string config_path, out_dir, network_path, holdings_path, bars_path, eod_path;
    std::string labels_path, values_path, date, snapshot_date, ks_arg;
    int workers = 0;
    double filter_k = 0.95;

    // validate / run / report ------------------------------------------------
    auto* validate_cmd = app.add_subcommand("validate", "validate a run configuration");
    validate_cmd->add_option("--config", config_path, "run configuration file")->required();

    auto* run_cmd = app.add_subcommand("run", "execute the full pipeline");
    run_cmd->add_option("--config", config_path, "run configuration file")->required();
    run_cmd->add_option("--workers", workers, "worker threads for the causality stage");

    auto* report_cmd = app.add_subcommand("report", "re-emit the consolidated report bundle");
    report_cmd->add_option("--config", config_path, "run configuration file")->required();

    // network -----------------------------------------------------------------
    auto* network_cmd = app.add_subcommand("network", "network construction");
    auto* net_build = network_cmd->add_subcommand("build", "project holdings into a stock network");
    net_build->add_option("--holdings", holdings_path, "holdings CSV")->required();
    net_build->add_option("--snapshot-date", snapshot_date, "as-of date to select")->required();
    net_build->add_option("--out", out_dir, "output artifact path")->required();
    net_build->add_option("--filter-k", filter_k, "weight-quantile filter parameter");

    auto* net_filter = network_cmd->add_subcommand("filter", "re-filter an existing network artifact");
    net_filter->add_option("--in", network_path, "input artifact")->required();
    net_filter->add_option("--k", filter_k, "weight-quantile filter parameter")->required();
    net_filter->add_option("--out", out_dir, "output artifact path")->required();

    auto* net_sweep = network_cmd->add_subcommand("sweep", "evaluate the filter across k values");
    net_sweep->add_option("--in", network_path, "input artifact")->required();
    net_sweep->add_option("--ks", ks_arg, "comma-separated ascending k values")->required();
    net_sweep->add_option("--out", out_dir, "output CSV path")->required();

    // metrics ------------------------------------------------------------------
    auto* metrics_cmd = app.add_subcommand("metrics", "topology diagnostics for a network artifact");
    metrics_cmd->add_option("--network", network_path, "network artifact")->required();
    metrics_cmd->add_option("--out", out_dir, "output directory")->required();
    metrics_cmd->add_option("--labels", labels_path, "labels CSV");
    metrics_cmd->add_option("--market-values", values_path, "market values CSV");

    // herding ------------------------------------------------------------------
    auto* herding_cmd = app.add_subcommand("herding", "institution investment-pattern analysis");
    herding_cmd->add_option("--holdings", holdings_path, "holdings CSV")->required();
    herding_cmd->add_option("--network", network_path, "network artifact")->required();
    herding_cmd->add_option("--snapshot-date", snapshot_date, "as-of date to select")->required();
    herding_cmd->add_option("--eod", eod_path, "end-of-day CSV (for loss)");
    herding_cmd->add_option("--date", date, "crash date for the loss column");
    herding_cmd->add_option("--out", out_dir, "output directory")->required();

    // timeseries -----------------------------------------------------------------
    std::string dates_arg = "2015-06-26,2015-06-29,2015-07-02,2015-07-03";
    int window_minutes = 10, top_n = 5, trials = 100;
    std::uint64_t seed = 20150630;
    auto* ts_cmd = app.add_subcommand("timeseries", "windowed group returns and hub scatter");
    ts_cmd->add_option("--network", network_path, "network artifact")->required();
    ts_cmd->add_option("--bars", bars_path, "minute bars CSV")->required();
    ts_cmd->add_option("--eod", eod_path, "end-of-day CSV")->required();
    ts_cmd->add_option("--dates", dates_arg, "comma-separated crash dates");
    ts_cmd->add_option("--window-minutes", window_minutes, "window length");
    ts_cmd->add_option("--top-n", top_n, "number of hubs");
    ts_cmd->add_option("--trials", trials, "randomization trials");
    ts_cmd->add_option("--seed", seed, "randomization seed");
    ts_cmd->add_option("--out", out_dir, "output directory")->required();

    // causality -----------------------------------------------------------------
    double alpha = 0.05;
    int max_lag = 10, dmax = 1, min_points = 60;
    std::string criterion = "bic";
    std::size_t sample_pairs = 100000;
    auto* causality_cmd = app.add_subcommand("causality", "pairwise Granger-causality engine");
    auto* causality_run = causality_cmd->add_subcommand("run", "test every edge of a network for one day");
    causality_run->add_option("--date", date, "trading date")->required();
    causality_run->add_option("--edges", network_path, "network artifact whose edges to test")->required();
    causality_run->add_option("--bars", bars_path, "minute bars CSV")->required();
    causality_run->add_option("--eod", eod_path, "end-of-day CSV")->required();
    causality_run->add_option("--alpha", alpha, "significance level");
    causality_run->add_option("--max-lag", max_lag, "lag search upper bound");
    causality_run->add_option("--dmax", dmax, "augmentation lags");
    causality_run->add_option("--min-points", min_points, "minimum joint observations");
    causality_run->add_option("--lag-criterion", criterion, "aic or bic");
    causality_run->add_option("--workers", workers, "worker threads");
    causality_run->add_option("--sample-pairs", sample_pairs, "pairs sampled for the average level");
    causality_run->add_option("--seed", seed, "sampling seed");
    causality_run->add_option("--top-n", top_n, "number of hubs in the summary");
    causality_run->add_option("--out", out_dir, "output directory")->required();

    // synth ----------------------------------------------------------------------
    std::string synth_config;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic market fixture");
    synth_cmd->add_option("--out", out_dir, "data directory to write")->required();
    synth_cmd->add_option("--seed", seed, "generator seed");
    synth_cmd->add_option("--write-config", synth_config, "also write a ready-to-run config here");

    CLI11_PARSE(app, argc, argv);

    using namespace stocknet;
    namespace fs = std::filesystem;
    try {
        if (*validate_cmd) {
            std::vector<std::string> unknown;
            RunConfig cfg = parse_config(config_path, &unknown);
            auto findings = validate(cfg, unknown);
            if (findings.empty()) std::cout << "configuration valid, no findings\n";
            return print_findings(findings);
        }
        if (*run_cmd) {
            RunConfig cfg = load_validated_config(config_path, workers);
            Pipeline pipeline(cfg);
            pipeline.run(&std::cout);
            std::cout << "manifest: " << (fs::path(cfg.output_dir) / "manifest.json").string() << '\n';
            return 0;
        }
        if (*report_cmd) {
            RunConfig cfg = load_validated_config(config_path, workers);
            Pipeline pipeline(cfg);
            pipeline.report_only(&std::cout);
            return 0;
        }
        if (*net_build) {
            ParseReport report;
            auto records = parse_holdings(holdings_path, report);
            std::vector<HoldingRecord> snapshot;
            for (auto& r : records)
                if (r.as_of_date == snapshot_date) snapshot.push_back(std::move(r));
            if (snapshot.empty()) throw std::runtime_error("no holdings for snapshot date " + snapshot_date);
            auto net = project(build_bipartite(aggregate_by_manager(snapshot)));
            if (filter_k > 0.0) net = filter_edges(net, filter_k);
            save_network(net, out_dir);
            std::cout << "nodes " << net.node_count() << " edges " << net.edge_count() << " k "
                      << fmt_double(filter_k) << '\n';
            return 0;
        }
        if (*net_filter) {
            auto net = filter_edges(load_network(network_path), filter_k);
            save_network(net, out_dir);
            std::cout << "edges " << net.edge_count() << " after filter k=" << fmt_double(filter_k) << '\n';
            return 0;
        }
        if (*net_sweep) {
            std::vector<double> ks;
            for (const auto& part : split_csv_line(ks_arg, ',')) {
                double k;
                if (!parse_double(part, k)) throw std::runtime_error("bad k value: " + part);
                ks.push_back(k);
            }
            auto sweep = filter_sweep(load_network(network_path), ks);
            CsvWriter w(out_dir);
            w.row({"k", "threshold_weight_cents", "ws_ratio", "lwcc_size", "edge_count"});
            for (const auto& p : sweep)
                w.row({fmt_double(p.k), fmt_int(p.threshold_weight), fmt_double(p.ws_ratio),
                       fmt_int(p.lwcc_size), fmt_int(static_cast<std::int64_t>(p.edge_count))});
            return 0;
        }
        if (*metrics_cmd) {
            StockNetwork net = load_network(network_path);
            NetworkStats stats = compute_stats(net);
            fs::create_directories(out_dir);
            CsvWriter w((fs::path(out_dir) / "network_summary.csv").string());
            w.row({"density", "node_count", "edge_count", "in_assortativity", "out_assortativity",
                   "avg_out_degree", "weight_mean", "weight_std", "weight_sum", "n_scc", "n_wcc",
                   "max_scc_size", "max_wcc_size"});
            w.row({fmt_double(stats.density), fmt_int(stats.node_count),
                   fmt_int(static_cast<std::int64_t>(stats.edge_count)),
                   stats.in_assortativity.defined() ? fmt_double(*stats.in_assortativity.value) : "",
                   stats.out_assortativity.defined() ? fmt_double(*stats.out_assortativity.value) : "",
                   fmt_double(stats.avg_degree), fmt_double(stats.weight_mean), fmt_double(stats.weight_std),
                   fmt_double(stats.weight_sum), fmt_int(stats.n_scc), fmt_int(stats.n_wcc),
                   fmt_int(stats.max_scc_size), fmt_int(stats.max_wcc_size)});
            DegreePartition partition = degree_partition(net);
            std::cout << "nodes " << stats.node_count << " edges " << stats.edge_count << " density "
                      << fmt_double(stats.density) << "\nthresholds " << partition.thresholds[0] << ' '
                      << partition.thresholds[1] << ' ' << partition.thresholds[2] << '\n';
            return 0;
        }
        if (*herding_cmd) {
            ParseReport report;
            auto records = parse_holdings(holdings_path, report);
            std::vector<HoldingRecord> snapshot;
            for (auto& r : records)
                if (r.as_of_date == snapshot_date) snapshot.push_back(std::move(r));
            if (snapshot.empty()) throw std::runtime_error("no holdings for snapshot date " + snapshot_date);
            auto bipartite = build_bipartite(aggregate_by_manager(snapshot));
            StockNetwork net = load_network(network_path);
            DegreePartition partition = degree_partition(net);
            HerdingMatrix matrix = herding_matrices(bipartite, partition, net);
            fs::create_directories(out_dir);
            {
                CsvWriter w((fs::path(out_dir) / "herding_heatmap.csv").string());
                w.row({"institution", "group", "metric", "value"});
                for (std::size_t m = 0; m < matrix.institutions.size(); ++m)
                    for (int g = 0; g < DegreePartition::kGroups; ++g) {
                        w.row({matrix.institutions[m], DegreePartition::label(g), "count_share",
                               matrix.group_empty[g] ? "" : fmt_double(matrix.cells_count[m][g])});
                        w.row({matrix.institutions[m], DegreePartition::label(g), "avg_value",
                               matrix.group_empty[g] ? "" : fmt_double(matrix.cells_value[m][g])});
                    }
            }
            {
                CsvWriter w((fs::path(out_dir) / "herding_ttests.csv").string());
                w.row({"matrix", "group_low", "group_high", "t_stat", "p_value", "n_pairs", "note"});
                for (bool vm : {false, true})
                    for (const auto& t : adjacent_group_tests(matrix, vm))
                        w.row({vm ? "avg_value" : "count_share", t.group_low, t.group_high,
                               t.t_stat.defined() ? fmt_double(*t.t_stat.value) : "",
                               t.p_value.defined() ? fmt_double(*t.p_value.value) : "",
                               fmt_int(static_cast<std::int64_t>(t.n_pairs)),
                               t.t_stat.defined() ? "" : t.t_stat.reason});
            }
            std::cout << "institutions " << matrix.institutions.size() << '\n';
            return 0;
        }
        if (*ts_cmd) {
            RunConfig cfg;
            cfg.minute_bars = bars_path;
            cfg.end_of_day = eod_path;
            cfg.window_minutes = window_minutes;
            cfg.top_n = top_n;
            cfg.trials = trials;
            cfg.seed = seed;
            StockNetwork net = load_network(network_path);
            DegreePartition partition = degree_partition(net);
            SessionCalendar calendar;
            fs::create_directories(out_dir);
            for (const auto& d : split_csv_line(dates_arg, ',')) {
                auto changes = changes_for_date(bars_path, eod_path, calendar, d);
                std::vector<std::string> ids;
                for (const auto& [id, _] : changes) ids.push_back(id);
                std::sort(ids.begin(), ids.end());
                std::vector<WindowedChanges> windowed;
                for (const auto& id : ids) windowed.push_back(window_last(changes.at(id), window_minutes));
                auto table = group_mean_changes(windowed, net, partition);
                CsvWriter w((fs::path(out_dir) / ("group_window_means_" + d + ".csv")).string());
                w.row({"date", "window", "group", "mean_change", "stocks"});
                for (int wi = 0; wi < table.n_windows; ++wi)
                    for (int g = 0; g < DegreePartition::kGroups; ++g)
                        w.row({d, fmt_int(wi), DegreePartition::label(g),
                               is_valid(table.means[wi][g]) ? fmt_double(table.means[wi][g]) : "",
                               fmt_int(table.counts[wi][g])});
                auto scatter = hub_successor_scatter(net, windowed, static_cast<std::size_t>(top_n));
                CsvWriter sw((fs::path(out_dir) / ("hub_successor_scatter_" + d + ".csv")).string());
                sw.row({"date", "hub", "window", "hub_change", "successor_mean", "successors"});
                for (const auto& s : scatter)
                    for (std::size_t wi = 0; wi < s.hub_change.size(); ++wi) {
                        if (!is_valid(s.hub_change[wi]) || !is_valid(s.successor_mean[wi])) continue;
                        sw.row({d, s.hub_id, fmt_int(static_cast<std::int64_t>(wi)),
                                fmt_double(s.hub_change[wi]), fmt_double(s.successor_mean[wi]),
                                fmt_int(s.successor_count)});
                    }
                std::cout << d << ": " << changes.size() << " usable stocks\n";
            }
            return 0;
        }
        if (*causality_run) {
            GrangerConfig gcfg = granger_from_flags(alpha, max_lag, dmax, min_points, criterion);
            StockNetwork net = load_network(network_path);
            SessionCalendar calendar;
            auto changes = changes_for_date(bars_path, eod_path, calendar, date);
            std::vector<std::pair<std::string, std::string>> pairs;
            for (const auto& e : net.edges())
                pairs.emplace_back(net.nodes()[e.src], net.nodes()[e.dst]);
            auto run = run_pairs(pairs, changes, gcfg, workers > 0 ? workers : 1);
            fs::create_directories(out_dir);
            {
                CsvWriter w((fs::path(out_dir) / ("outcomes_" + date + ".csv")).string());
                w.row({"source", "target", "date", "status", "lag", "wald", "p", "reject"});
                for (const auto& o : run.outcomes) {
                    if (o.tested())
                        w.row({o.source, o.target, date, o.status_text(), fmt_int(o.lag_m),
                               fmt_double(o.wald_stat), fmt_double(o.p_value), o.reject ? "true" : "false"});
                    else
                        w.row({o.source, o.target, date, o.status_text(), "", "", "", ""});
                }
            }
            auto hubs = ratio_for_hubs(run.outcomes, net, static_cast<std::size_t>(top_n));
            auto avg = average_level(changes, gcfg, sample_pairs, derive_seed(seed, "cli/avg"),
                                     workers > 0 ? workers : 1);
            std::cout << "tested " << run.tested << " skipped " << run.skipped << '\n';
            if (avg.ratio.defined())
                std::cout << "average_level " << fmt_double(*avg.ratio.value) << " (se "
                          << fmt_double(avg.standard_error) << ")\n";
            for (const auto& h : hubs)
                std::cout << h.hub << ' ' << (h.ratio.defined() ? fmt_double(*h.ratio.value) : "-") << '\n';
            return 0;
        }
        if (*synth_cmd) {
            SynthParams params;
            params.seed = seed;
            SynthMarket market = make_synth_market(params);
            write_synth_market(market, out_dir);
            std::cout << "wrote synthetic market to " << out_dir << '\n';
            if (!synth_config.empty()) {
                write_synth_config(market, out_dir, fs::path(out_dir).parent_path() / "out", synth_config);
                std::cout << "wrote config " << synth_config << '\n';
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
