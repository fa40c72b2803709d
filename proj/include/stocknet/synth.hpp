#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "stocknet/calendar.hpp"
#include "stocknet/csv.hpp"
#include "stocknet/format.hpp"
#include "stocknet/money.hpp"
#include "stocknet/rng.hpp"

namespace stocknet {

// Synthetic market fixture with designed hub/successor structure:
//   - every investor holds every hub stock with a large position, so hubs
//     project to the highest out-degrees and the heaviest edge weights;
//   - successor changes follow the lagged common hub factor with amplified
//     noise and three times the hub drop;
//   - isolated stocks are held by single-stock investors and stay
//     disconnected in the projection.
//
// The day's drop is realized in the opening minutes and holds flat after.
// A flat level is absorbed by the regression intercept, so the causality
// engine sees sibling successors as near-independent while the hub factor's
// white innovations stay strongly predictive one minute ahead. Stretching
// ramp_minutes re-introduces an intraday trend that every stock can "learn"
// from any sibling's lags, which is exactly what crash days look like and
// why their average rejection level is high.
struct SynthParams {
    int n_hubs = 5;
    int n_successors = 45;
    int n_isolated = 3;
    int n_investors = 15;
    std::vector<std::string> dates{"2015-06-26", "2015-06-29"};
    std::string prior_date = "2015-06-25";
    std::string snapshot_date = "2015-06-30";
    std::uint64_t seed = 42;

    double hub_day_drop = -0.01;          // hub cumulative change once the ramp ends
    double successor_drop_multiple = 3.0; // successor drop relative to the hub's
    int ramp_minutes = 1;                 // 1 = the whole drop lands at the open
    double factor_noise = 1.5e-3;
    double hub_noise = 3e-4;
    double successor_noise = 3e-3;
    double isolated_noise = 1e-3;
    double missing_rate = 0.02;
};

struct SynthMarket {
    SynthParams params;
    SessionCalendar calendar;
    std::vector<std::string> stock_ids;           // all stocks, index order
    std::vector<std::string> hub_ids;
    std::vector<std::string> successor_ids;
    std::vector<std::string> isolated_ids;
    // rows ready for CSV emission
    std::vector<std::array<std::string, 5>> holdings_rows;       // fund,manager,stock,value,date
    std::vector<std::array<std::string, 4>> bar_rows;            // stock,date,time,price
    std::vector<std::array<std::string, 3>> eod_rows;            // stock,date,close
    std::vector<std::array<std::string, 3>> label_rows;          // stock,sector,style
    std::vector<std::array<std::string, 2>> market_value_rows;   // stock,value
};

inline SynthMarket make_synth_market(const SynthParams& params = {}) {
    SynthMarket m;
    m.params = params;
    const int n_stocks = params.n_hubs + params.n_successors + params.n_isolated;
    const int session = m.calendar.session_minutes();

    // Hub positions are spread through the id range so id-ordering carries no
    // role information.
    std::set<int> hub_pos;
    for (int i = 0; i < params.n_hubs; ++i)
        hub_pos.insert(static_cast<int>((static_cast<std::int64_t>(i) * n_stocks + n_stocks / 2) / params.n_hubs));
    std::set<int> isolated_pos;
    for (int i = 0; i < params.n_isolated; ++i) {
        int pos = (7 * i + 5) % n_stocks;
        while (hub_pos.contains(pos) || isolated_pos.contains(pos)) pos = (pos + 1) % n_stocks;
        isolated_pos.insert(pos);
    }

    std::vector<int> role(n_stocks, 1);   // 0 hub, 1 successor, 2 isolated
    for (int p : hub_pos) role[p] = 0;
    for (int p : isolated_pos) role[p] = 2;
    std::vector<int> successor_index(n_stocks, -1);
    int next_succ = 0;
    for (int i = 0; i < n_stocks; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%06d.SY", 100000 + i);
        m.stock_ids.emplace_back(buf);
        if (role[i] == 0) m.hub_ids.push_back(m.stock_ids.back());
        else if (role[i] == 2) m.isolated_ids.push_back(m.stock_ids.back());
        else {
            successor_index[i] = next_succ++;
            m.successor_ids.push_back(m.stock_ids.back());
        }
    }

    // Holdings: every investor holds all hubs heavily plus a block of
    // successors; positions are split 60/40 across two funds per manager.
    Rng hrng(derive_seed(params.seed, "synth/holdings"));
    std::vector<Cents> held_total(n_stocks, 0);
    auto add_holding = [&](const std::string& manager, int stock, Cents value) {
        const Cents f1 = value * 3 / 5;
        const Cents f2 = value - f1;
        m.holdings_rows.push_back({manager + "-A", manager, m.stock_ids[stock], format_cents(f1),
                                   params.snapshot_date});
        if (f2 > 0)
            m.holdings_rows.push_back({manager + "-B", manager, m.stock_ids[stock], format_cents(f2),
                                       params.snapshot_date});
        held_total[stock] += value;
    };
    for (int j = 0; j < params.n_investors; ++j) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "M%02d", j + 1);
        const std::string manager = buf;
        for (int s = 0; s < n_stocks; ++s)
            if (role[s] == 0)
                add_holding(manager, s, static_cast<Cents>(80000000 + hrng.below(40000000)));
        const int block_start = static_cast<int>((static_cast<std::int64_t>(j) * params.n_successors) /
                                                 params.n_investors);
        const int block_len = 10 + static_cast<int>(hrng.below(9));
        for (int b = 0; b < block_len; ++b) {
            const int succ = (block_start + b) % params.n_successors;
            for (int s = 0; s < n_stocks; ++s) {
                if (successor_index[s] == succ) {
                    add_holding(manager, s, static_cast<Cents>(2000000 + hrng.below(6000000)));
                    break;
                }
            }
        }
    }
    {
        int zi = 0;
        for (int s = 0; s < n_stocks; ++s) {
            if (role[s] != 2) continue;
            char buf[16];
            std::snprintf(buf, sizeof(buf), "Z%02d", ++zi);
            add_holding(buf, s, 1000000);
        }
    }

    // Prices: chain closes across dates; intraday levels from the change
    // series against the prior close.
    std::vector<double> close(n_stocks);
    Rng prng(derive_seed(params.seed, "synth/prices"));
    for (int s = 0; s < n_stocks; ++s) {
        close[s] = 10.0 + prng.next_double() * 90.0;
        m.eod_rows.push_back({m.stock_ids[s], params.prior_date, fmt_double(close[s])});
    }
    auto ramp = [&](double depth, int t) {
        const double frac = std::min(1.0, static_cast<double>(t + 1) / params.ramp_minutes);
        return depth * frac;
    };
    const double extra_drop = params.hub_day_drop * (params.successor_drop_multiple - 1.0);
    for (std::size_t di = 0; di < params.dates.size(); ++di) {
        const std::string& date = params.dates[di];
        Rng drng(derive_seed(params.seed, "synth/day", di));
        std::vector<double> factor(session);
        for (int t = 0; t < session; ++t)
            factor[t] = ramp(params.hub_day_drop, t) + params.factor_noise * drng.next_normal();
        std::vector<std::vector<double>> change(n_stocks, std::vector<double>(session));
        for (int s = 0; s < n_stocks; ++s) {
            for (int t = 0; t < session; ++t) {
                if (role[s] == 0) {
                    change[s][t] = factor[t] + params.hub_noise * drng.next_normal();
                } else if (role[s] == 1) {
                    const double lagged_factor = t > 0 ? factor[t - 1] : 0.0;
                    change[s][t] = lagged_factor + ramp(extra_drop, t) +
                                   params.successor_noise * drng.next_normal();
                } else {
                    change[s][t] = params.isolated_noise * drng.next_normal();
                }
            }
        }
        Rng gap_rng(derive_seed(params.seed, "synth/gaps", di));
        for (int s = 0; s < n_stocks; ++s) {
            // first isolated stock is suspended on the first date
            const bool suspended = di == 0 && role[s] == 2 && m.stock_ids[s] == m.isolated_ids.front();
            double last_price = close[s];
            for (int t = 0; t < session; ++t) {
                if (suspended) continue;
                if (t > 0 && gap_rng.next_double() < params.missing_rate) continue;   // missing minute
                last_price = close[s] * (1.0 + change[s][t]);
                m.bar_rows.push_back({m.stock_ids[s], date, m.calendar.label_of(t), fmt_double(last_price)});
            }
            close[s] = last_price;
            m.eod_rows.push_back({m.stock_ids[s], date, fmt_double(close[s])});
        }
    }

    // Labels and whole-stock market values; one successor is left unlabeled.
    static const char* succ_sectors[3] = {"manufacturing", "information technology", "retailing"};
    static const char* succ_styles[3] = {"mid-cap-growth", "mid-cap-balance", "small-cap-growth"};
    bool skipped_label = false;
    for (int s = 0; s < n_stocks; ++s) {
        if (role[s] == 1 && !skipped_label) {
            skipped_label = true;   // exercise the unlabeled row
        } else if (role[s] == 0) {
            m.label_rows.push_back({m.stock_ids[s], "finance", "large-cap-balance"});
        } else if (role[s] == 1) {
            const int v = successor_index[s] % 3;
            m.label_rows.push_back({m.stock_ids[s], succ_sectors[v], succ_styles[v]});
        } else {
            m.label_rows.push_back({m.stock_ids[s], "other", "small-cap-value"});
        }
        const Cents mv = held_total[s] * (role[s] == 0 ? 2 : role[s] == 1 ? 5 : 20);
        m.market_value_rows.push_back({m.stock_ids[s], format_cents(mv)});
    }
    return m;
}

// Writes the five input CSVs under dir; file names are fixed.
inline void write_synth_market(const SynthMarket& m, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        CsvWriter w((dir / "holdings.csv").string());
        w.row({"fund_id", "manager_id", "stock_id", "market_value", "as_of_date"});
        for (const auto& r : m.holdings_rows) w.row({r[0], r[1], r[2], r[3], r[4]});
    }
    {
        CsvWriter w((dir / "minute_bars.csv").string());
        w.row({"stock_id", "date", "time", "last_price"});
        for (const auto& r : m.bar_rows) w.row({r[0], r[1], r[2], r[3]});
    }
    {
        CsvWriter w((dir / "end_of_day.csv").string());
        w.row({"stock_id", "date", "close"});
        for (const auto& r : m.eod_rows) w.row({r[0], r[1], r[2]});
    }
    {
        CsvWriter w((dir / "labels.csv").string());
        w.row({"stock_id", "sector", "style"});
        for (const auto& r : m.label_rows) w.row({r[0], r[1], r[2]});
    }
    {
        CsvWriter w((dir / "market_values.csv").string());
        w.row({"stock_id", "market_value"});
        for (const auto& r : m.market_value_rows) w.row({r[0], r[1]});
    }
}

// Emits a pipeline config pointing at a generated market.
inline void write_synth_config(const SynthMarket& m, const std::filesystem::path& data_dir,
                               const std::filesystem::path& output_dir, const std::filesystem::path& config_path,
                               double filter_k = 0.5, int trials = 100, std::size_t sample_pairs = 1500) {
    std::ofstream out(config_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write config: " + config_path.string());
    auto p = [&](const std::filesystem::path& f) { return (data_dir / f).string(); };
    out << "holdings = " << p("holdings.csv") << '\n';
    out << "minute_bars = " << p("minute_bars.csv") << '\n';
    out << "end_of_day = " << p("end_of_day.csv") << '\n';
    out << "labels = " << p("labels.csv") << '\n';
    out << "market_values = " << p("market_values.csv") << '\n';
    out << "snapshot_date = " << m.params.snapshot_date << '\n';
    out << "crash_dates = ";
    for (std::size_t i = 0; i < m.params.dates.size(); ++i)
        out << (i ? "," : "") << m.params.dates[i];
    out << '\n';
    out << "filter_k = " << fmt_double(filter_k) << '\n';
    out << "window_minutes = 10\n";
    out << "top_n = " << m.params.n_hubs << '\n';
    out << "trials = " << trials << '\n';
    out << "seed = " << m.params.seed << '\n';
    out << "granger_sample_pairs = " << sample_pairs << '\n';
    out << "output_dir = " << output_dir.string() << '\n';
}

} // namespace stocknet
