#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stocknet/calendar.hpp"
#include "stocknet/checksum.hpp"
#include "stocknet/format.hpp"
#include "stocknet/granger.hpp"

namespace stocknet {

// Declarative run configuration: a flat key = value file, '#' comments.
struct RunConfig {
    // inputs
    std::string holdings;
    std::string minute_bars;
    std::string end_of_day;
    std::string labels;           // optional
    std::string market_values;    // optional
    // run shape
    std::string snapshot_date;
    std::vector<std::string> crash_dates{"2015-06-26", "2015-06-29", "2015-07-02", "2015-07-03"};
    double filter_k = 0.95;
    int window_minutes = 10;
    int top_n = 5;
    int trials = 100;
    std::uint64_t seed = 20150630;
    int rich_club_max_r = 50;
    std::string session = "09:30-11:30,13:00-15:00";
    std::set<std::string> skip_stages;
    std::string output_dir;
    int workers = 1;
    // causality engine
    GrangerConfig granger;
    std::size_t granger_sample_pairs = 100000;
    bool granger_exhaustive = false;

    std::string raw_text;   // normalized key=value lines, hashed for caching

    SessionCalendar calendar() const {
        std::vector<SessionCalendar::Window> windows;
        for (const auto& part : split_csv_line(session, ',')) {
            auto dash = part.find('-');
            if (dash == std::string::npos) throw std::invalid_argument("bad session window: " + part);
            SessionCalendar dummy;   // reuse slot parsing for "HH:MM"
            auto parse_minute = [](const std::string& hhmm) {
                if (hhmm.size() != 5 || hhmm[2] != ':') throw std::invalid_argument("bad session time: " + hhmm);
                return (hhmm[0] - '0') * 600 + (hhmm[1] - '0') * 60 + (hhmm[3] - '0') * 10 + (hhmm[4] - '0');
            };
            windows.push_back({parse_minute(part.substr(0, dash)), parse_minute(part.substr(dash + 1))});
        }
        return SessionCalendar(windows);
    }

    // Hash of the semantic configuration. `workers` is excluded: it affects
    // the schedule, never the results.
    std::string config_hash() const {
        Fnv1a64 h;
        std::istringstream in(raw_text);
        std::string line;
        while (std::getline(in, line)) {
            if (line.rfind("workers", 0) == 0) continue;
            h.update(line);
            h.update("\n");
        }
        return hex64(h.digest());
    }
};

struct Finding {
    enum class Severity { Error, Warning };
    Severity severity;
    std::string message;
};

inline bool has_errors(const std::vector<Finding>& findings) {
    for (const auto& f : findings)
        if (f.severity == Finding::Severity::Error) return true;
    return false;
}

// Parses the flat key = value format. Unknown keys are collected so validate
// can warn about them.
inline RunConfig parse_config(const std::string& path, std::vector<std::string>* unknown_keys = nullptr) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    RunConfig cfg;
    std::map<std::string, std::string> kv;
    std::ostringstream normalized;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const char* ws = " \t";
            auto b = s.find_first_not_of(ws);
            if (b == std::string::npos) return std::string();
            auto e = s.find_last_not_of(ws);
            return s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) continue;
        kv[key] = value;
    }
    for (const auto& [k, v] : kv) normalized << k << " = " << v << '\n';
    cfg.raw_text = normalized.str();

    auto take = [&](const char* key) -> std::string {
        auto it = kv.find(key);
        if (it == kv.end()) return {};
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    auto take_double = [&](const char* key, double& out) {
        std::string v = take(key);
        if (!v.empty() && !parse_double(v, out)) throw std::runtime_error(std::string("bad number for ") + key + ": " + v);
    };
    auto take_int = [&](const char* key, int& out) {
        std::string v = take(key);
        std::int64_t tmp;
        if (!v.empty()) {
            if (!parse_int64(v, tmp)) throw std::runtime_error(std::string("bad integer for ") + key + ": " + v);
            out = static_cast<int>(tmp);
        }
    };

    cfg.holdings = take("holdings");
    cfg.minute_bars = take("minute_bars");
    cfg.end_of_day = take("end_of_day");
    cfg.labels = take("labels");
    cfg.market_values = take("market_values");
    cfg.snapshot_date = take("snapshot_date");
    if (std::string v = take("crash_dates"); !v.empty()) {
        cfg.crash_dates.clear();
        for (auto& d : split_csv_line(v, ','))
            if (!d.empty()) cfg.crash_dates.push_back(d);
    }
    take_double("filter_k", cfg.filter_k);
    take_int("window_minutes", cfg.window_minutes);
    take_int("top_n", cfg.top_n);
    take_int("trials", cfg.trials);
    if (std::string v = take("seed"); !v.empty()) {
        std::int64_t s;
        if (!parse_int64(v, s)) throw std::runtime_error("bad seed: " + v);
        cfg.seed = static_cast<std::uint64_t>(s);
    }
    take_int("rich_club_max_r", cfg.rich_club_max_r);
    if (std::string v = take("session"); !v.empty()) cfg.session = v;
    if (std::string v = take("skip_stages"); !v.empty())
        for (auto& s : split_csv_line(v, ','))
            if (!s.empty()) cfg.skip_stages.insert(s);
    cfg.output_dir = take("output_dir");
    take_int("workers", cfg.workers);

    take_double("granger_alpha", cfg.granger.alpha);
    take_int("granger_max_lag", cfg.granger.max_lag);
    take_int("granger_dmax", cfg.granger.d_max);
    take_int("granger_min_points", cfg.granger.min_valid_points);
    take_double("granger_min_variance", cfg.granger.min_variance);
    if (std::string v = take("granger_lag_criterion"); !v.empty()) {
        if (v == "aic") cfg.granger.lag_criterion = LagCriterion::Aic;
        else if (v == "bic") cfg.granger.lag_criterion = LagCriterion::Bic;
        else throw std::runtime_error("bad granger_lag_criterion (aic|bic): " + v);
    }
    if (std::string v = take("granger_sample_pairs"); !v.empty()) {
        std::int64_t s;
        if (!parse_int64(v, s) || s < 0) throw std::runtime_error("bad granger_sample_pairs: " + v);
        cfg.granger_sample_pairs = static_cast<std::size_t>(s);
    }
    if (std::string v = take("granger_exhaustive"); !v.empty())
        cfg.granger_exhaustive = v == "true" || v == "1";

    if (unknown_keys)
        for (const auto& [k, _] : kv) unknown_keys->push_back(k);
    return cfg;
}

// Hard errors stop the run; warnings are informational.
inline std::vector<Finding> validate(const RunConfig& cfg, const std::vector<std::string>& unknown_keys = {}) {
    std::vector<Finding> findings;
    auto error = [&](std::string msg) { findings.push_back({Finding::Severity::Error, std::move(msg)}); };
    auto warn = [&](std::string msg) { findings.push_back({Finding::Severity::Warning, std::move(msg)}); };
    namespace fs = std::filesystem;

    const bool need_prices = !cfg.skip_stages.contains("timeseries") || !cfg.skip_stages.contains("causality") ||
                             !cfg.skip_stages.contains("herding");

    auto check_path = [&](const std::string& path, const char* key, bool required) {
        if (path.empty()) {
            if (required) error(std::string("missing required input: ") + key);
            return;
        }
        if (!fs::exists(path)) error(std::string(key) + " path does not exist: " + path);
    };
    check_path(cfg.holdings, "holdings", true);
    check_path(cfg.minute_bars, "minute_bars", need_prices);
    check_path(cfg.end_of_day, "end_of_day", need_prices);
    check_path(cfg.labels, "labels", false);
    check_path(cfg.market_values, "market_values", false);

    if (cfg.output_dir.empty()) error("missing output_dir");
    if (cfg.snapshot_date.empty()) error("missing snapshot_date");
    else if (!is_iso_date(cfg.snapshot_date)) error("snapshot_date is not yyyy-mm-dd: " + cfg.snapshot_date);
    for (const auto& d : cfg.crash_dates)
        if (!is_iso_date(d)) error("crash date is not yyyy-mm-dd: " + d);
    if (!(cfg.filter_k >= 0.0 && cfg.filter_k < 1.0))
        error("filter_k must be in [0,1): " + fmt_double(cfg.filter_k));

    int session_minutes = 0;
    try {
        session_minutes = cfg.calendar().session_minutes();
    } catch (const std::exception& e) {
        error(std::string("bad session: ") + e.what());
    }
    if (session_minutes > 0) {
        if (cfg.window_minutes <= 0 || session_minutes % cfg.window_minutes != 0)
            error("window_minutes must divide the session length of " + fmt_int(session_minutes));
    }
    if (cfg.top_n < 1) error("top_n must be >= 1");
    if (cfg.trials < 1) error("trials must be >= 1");
    if (!(cfg.granger.alpha > 0.0 && cfg.granger.alpha < 1.0)) error("granger_alpha must be in (0,1)");
    if (cfg.granger.max_lag < 1) error("granger_max_lag must be >= 1");
    if (cfg.granger.d_max < 0 || cfg.granger.d_max > 2) error("granger_dmax must be 0..2");
    if (cfg.granger.min_valid_points < 20) error("granger_min_points must be >= 20");
    if (!cfg.granger_exhaustive && cfg.granger_sample_pairs < 1000)
        error("granger_sample_pairs must be >= 1000");
    for (const auto& s : cfg.skip_stages)
        if (s != "timeseries" && s != "causality" && s != "herding")
            error("skip_stages accepts timeseries, causality, herding; got: " + s);

    if (cfg.labels.empty()) warn("no labels file: composition reports will be omitted");
    if (cfg.market_values.empty()) warn("no market_values file: group feature-share report will be omitted");
    if (cfg.trials < 10) warn("trials < 10 gives noisy randomization baselines");
    for (const auto& k : unknown_keys) warn("unknown config key ignored: " + k);
    return findings;
}

} // namespace stocknet
