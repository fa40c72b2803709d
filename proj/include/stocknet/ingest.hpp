#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "stocknet/calendar.hpp"
#include "stocknet/csv.hpp"
#include "stocknet/format.hpp"
#include "stocknet/money.hpp"

namespace stocknet {

struct HoldingRecord {
    std::string fund_id;
    std::string manager_id;   // fund-management company
    std::string stock_id;
    Cents market_value = 0;
    std::string as_of_date;
};

struct AggregatedHolding {
    std::string manager_id;
    std::string stock_id;
    Cents market_value = 0;   // sum over the manager's funds
    std::string as_of_date;
};

struct StockLabel {
    std::string stock_id;
    std::string sector;
    std::string style;
};

// One stock's one-minute last prices for a single trading day. Missing
// minutes stay NaN; imputation is owned by the timeseries layer.
struct MinuteBarSeries {
    std::string stock_id;
    std::string trade_date;
    std::vector<double> minute_prices;   // session-slot indexed, NaN = missing
    double prev_close = std::numeric_limits<double>::quiet_NaN();
    int missing_minutes = 0;

    bool has_prev_close() const { return std::isfinite(prev_close) && prev_close > 0.0; }
    bool fully_missing() const { return missing_minutes == static_cast<int>(minute_prices.size()); }
    bool usable() const { return has_prev_close() && !fully_missing(); }
};

struct RowRejection {
    std::size_t row;
    std::string reason;
};

struct ParseReport {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::vector<RowRejection> rejections;

    void reject(std::size_t row, std::string reason) {
        ++rejected;
        rejections.push_back({row, std::move(reason)});
    }

    // JSON-lines {row, reason} dump.
    void write_log(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open rejection log: " + path);
        for (const auto& r : rejections) {
            nlohmann::ordered_json j;
            j["row"] = r.row;
            j["reason"] = r.reason;
            out << j.dump() << '\n';
        }
    }
};

// Column mapping for holdings files whose headers differ from the canonical
// names. Defaults to the canonical schema.
struct HoldingsSchema {
    std::string fund_id = "fund_id";
    std::string manager_id = "manager_id";
    std::string stock_id = "stock_id";
    std::string market_value = "market_value";
    std::string as_of_date = "as_of_date";
};

// Parses and normalizes a holdings CSV. Zero-valued records are dropped,
// negative values and duplicate (fund, stock, date) keys are rejected, and
// every non-accepted row lands in the report with its row number.
inline std::vector<HoldingRecord> parse_holdings(const std::string& path, ParseReport& report,
                                                 const HoldingsSchema& schema = {}) {
    CsvReader reader(path);
    const int c_fund = reader.require_column(schema.fund_id);
    const int c_mgr = reader.require_column(schema.manager_id);
    const int c_stock = reader.require_column(schema.stock_id);
    const int c_value = reader.require_column(schema.market_value);
    const int c_date = reader.require_column(schema.as_of_date);
    const std::size_t width = static_cast<std::size_t>(std::max({c_fund, c_mgr, c_stock, c_value, c_date})) + 1;

    std::vector<HoldingRecord> records;
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    std::vector<std::string> f;
    while (reader.next(f)) {
        const std::size_t row = reader.row_number();
        if (f.size() < width) {
            report.reject(row, "missing fields");
            continue;
        }
        HoldingRecord rec;
        rec.fund_id = f[c_fund];
        rec.manager_id = f[c_mgr];
        rec.stock_id = f[c_stock];
        rec.as_of_date = f[c_date];
        if (rec.fund_id.empty() || rec.manager_id.empty() || rec.stock_id.empty()) {
            report.reject(row, "empty identifier");
            continue;
        }
        if (!is_iso_date(rec.as_of_date)) {
            report.reject(row, "bad date");
            continue;
        }
        auto cents = parse_cents(f[c_value]);
        if (!cents) {
            report.reject(row, "unparsable market_value");
            continue;
        }
        if (*cents < 0) {
            report.reject(row, "negative value");
            continue;
        }
        if (*cents == 0) {
            report.reject(row, "zero value dropped");
            continue;
        }
        if (!seen.insert({rec.fund_id, rec.stock_id, rec.as_of_date}).second) {
            report.reject(row, "duplicate record");
            continue;
        }
        rec.market_value = *cents;
        records.push_back(std::move(rec));
        ++report.accepted;
    }
    return records;
}

// Groups ownership by fund-management company: per (manager, stock, date) the
// market value is the exact sum of member funds' values. Output is sorted by
// (date, manager, stock) and is invariant to input order.
inline std::vector<AggregatedHolding> aggregate_by_manager(const std::vector<HoldingRecord>& records) {
    std::map<std::tuple<std::string, std::string, std::string>, Cents> acc;
    for (const auto& r : records)
        acc[{r.as_of_date, r.manager_id, r.stock_id}] += r.market_value;
    std::vector<AggregatedHolding> out;
    out.reserve(acc.size());
    for (const auto& [key, value] : acc) {
        if (value == 0) continue;
        out.push_back({std::get<1>(key), std::get<2>(key), value, std::get<0>(key)});
    }
    return out;
}

// End-of-day close table with prior-close lookup.
class EodTable {
public:
    void add(const std::string& stock_id, const std::string& date, double close) {
        closes_[stock_id][date] = close;
    }

    // Close on exactly `date`, NaN if absent.
    double close_on(const std::string& stock_id, const std::string& date) const {
        auto it = closes_.find(stock_id);
        if (it == closes_.end()) return nan_();
        auto jt = it->second.find(date);
        return jt == it->second.end() ? nan_() : jt->second;
    }

    // Most recent close strictly before `date`, NaN if none.
    double prev_close(const std::string& stock_id, const std::string& date) const {
        auto it = closes_.find(stock_id);
        if (it == closes_.end()) return nan_();
        auto jt = it->second.lower_bound(date);
        if (jt == it->second.begin()) return nan_();
        return std::prev(jt)->second;
    }

    std::vector<std::string> stocks() const {
        std::vector<std::string> out;
        out.reserve(closes_.size());
        for (const auto& [id, _] : closes_) out.push_back(id);
        return out;
    }

    bool empty() const { return closes_.empty(); }

private:
    static double nan_() { return std::numeric_limits<double>::quiet_NaN(); }
    std::map<std::string, std::map<std::string, double>> closes_;
};

// end-of-day CSV: stock_id, date, close
inline EodTable parse_end_of_day(const std::string& path, ParseReport& report) {
    CsvReader reader(path);
    const int c_stock = reader.require_column("stock_id");
    const int c_date = reader.require_column("date");
    const int c_close = reader.require_column("close");
    const std::size_t width = static_cast<std::size_t>(std::max({c_stock, c_date, c_close})) + 1;

    EodTable table;
    std::vector<std::string> f;
    while (reader.next(f)) {
        const std::size_t row = reader.row_number();
        if (f.size() < width) {
            report.reject(row, "missing fields");
            continue;
        }
        double close;
        if (!is_iso_date(f[c_date])) {
            report.reject(row, "bad date");
            continue;
        }
        if (!parse_double(f[c_close], close) || !(close > 0.0)) {
            report.reject(row, "non-positive close");
            continue;
        }
        table.add(f[c_stock], f[c_date], close);
        ++report.accepted;
    }
    return table;
}

// minute-bar CSV: stock_id, date, time (HH:MM), last_price. Out-of-session
// ticks are discarded (counted in the report) and gaps stay NaN. A duplicate
// (stock, date, minute) keeps the later row, matching last-price semantics.
inline std::vector<MinuteBarSeries> parse_minute_bars(const std::string& path, const SessionCalendar& calendar,
                                                      const EodTable& eod, ParseReport& report) {
    CsvReader reader(path);
    const int c_stock = reader.require_column("stock_id");
    const int c_date = reader.require_column("date");
    const int c_time = reader.require_column("time");
    const int c_price = reader.require_column("last_price");
    const std::size_t width = static_cast<std::size_t>(std::max({c_stock, c_date, c_time, c_price})) + 1;
    const int session_len = calendar.session_minutes();

    std::map<std::pair<std::string, std::string>, std::vector<double>> grid;   // (date, stock) -> prices
    std::vector<std::string> f;
    while (reader.next(f)) {
        const std::size_t row = reader.row_number();
        if (f.size() < width) {
            report.reject(row, "missing fields");
            continue;
        }
        if (!is_iso_date(f[c_date])) {
            report.reject(row, "bad date");
            continue;
        }
        auto slot = calendar.slot_of(f[c_time]);
        if (!slot) {
            report.reject(row, "outside session");
            continue;
        }
        double price;
        if (!parse_double(f[c_price], price) || !(price > 0.0)) {
            report.reject(row, "non-positive price");
            continue;
        }
        auto& prices = grid[{f[c_date], f[c_stock]}];
        if (prices.empty()) prices.assign(session_len, std::numeric_limits<double>::quiet_NaN());
        prices[*slot] = price;
        ++report.accepted;
    }

    std::vector<MinuteBarSeries> out;
    out.reserve(grid.size());
    for (auto& [key, prices] : grid) {
        MinuteBarSeries s;
        s.trade_date = key.first;
        s.stock_id = key.second;
        s.minute_prices = std::move(prices);
        s.prev_close = eod.prev_close(s.stock_id, s.trade_date);
        s.missing_minutes = 0;
        for (double p : s.minute_prices)
            if (!std::isfinite(p)) ++s.missing_minutes;
        out.push_back(std::move(s));
    }
    return out;
}

// labels CSV: stock_id, sector, style. Later duplicates are rejected so each
// stock appears at most once.
inline std::vector<StockLabel> parse_labels(const std::string& path, ParseReport& report) {
    CsvReader reader(path);
    const int c_stock = reader.require_column("stock_id");
    const int c_sector = reader.require_column("sector");
    const int c_style = reader.require_column("style");
    const std::size_t width = static_cast<std::size_t>(std::max({c_stock, c_sector, c_style})) + 1;

    std::vector<StockLabel> out;
    std::set<std::string> seen;
    std::vector<std::string> f;
    while (reader.next(f)) {
        const std::size_t row = reader.row_number();
        if (f.size() < width) {
            report.reject(row, "missing fields");
            continue;
        }
        if (!seen.insert(f[c_stock]).second) {
            report.reject(row, "duplicate stock label");
            continue;
        }
        out.push_back({f[c_stock], f[c_sector], f[c_style]});
        ++report.accepted;
    }
    return out;
}

// market values CSV: stock_id, market_value (whole-stock capitalization).
inline std::unordered_map<std::string, Cents> parse_market_values(const std::string& path, ParseReport& report) {
    CsvReader reader(path);
    const int c_stock = reader.require_column("stock_id");
    const int c_value = reader.require_column("market_value");
    const std::size_t width = static_cast<std::size_t>(std::max(c_stock, c_value)) + 1;

    std::unordered_map<std::string, Cents> out;
    std::vector<std::string> f;
    while (reader.next(f)) {
        const std::size_t row = reader.row_number();
        if (f.size() < width) {
            report.reject(row, "missing fields");
            continue;
        }
        auto cents = parse_cents(f[c_value]);
        if (!cents || *cents < 0) {
            report.reject(row, "unparsable market_value");
            continue;
        }
        out[f[c_stock]] = *cents;
        ++report.accepted;
    }
    return out;
}

} // namespace stocknet
