#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "stocknet/ingest.hpp"

using namespace stocknet;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
    auto path = fs::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

} // namespace

TEST_CASE("parse_holdings maps fields and rejects bad rows") {
    auto path = write_temp("holdings_basic.csv",
                           "fund_id,manager_id,stock_id,market_value,as_of_date\n"
                           "F001,M01,601318.SH,1000000,2015-06-30\n"
                           "F002,M01,601318.SH,-5,2015-06-30\n"
                           "F003,M02,600036.SH,50,2015-06-30\n"
                           "F004,M02,600030.SH,abc,2015-06-30\n"
                           "F005,M03,600016.SH,25,2015-06-30\n");
    ParseReport report;
    auto records = parse_holdings(path.string(), report);
    REQUIRE(records.size() == 3);
    CHECK(records[0].fund_id == "F001");
    CHECK(records[0].manager_id == "M01");
    CHECK(records[0].stock_id == "601318.SH");
    CHECK(records[0].market_value == 100000000);   // cents
    CHECK(records[0].as_of_date == "2015-06-30");
    CHECK(report.accepted == 3);
    CHECK(report.rejected == 2);
    REQUIRE(report.rejections.size() == 2);
    CHECK(report.rejections[0].row == 3);
    CHECK(report.rejections[0].reason == "negative value");
    CHECK(report.rejections[1].reason == "unparsable market_value");
    fs::remove(path);
}

TEST_CASE("parse_holdings drops zero values and duplicate keys") {
    auto path = write_temp("holdings_dupes.csv",
                           "fund_id,manager_id,stock_id,market_value,as_of_date\n"
                           "F1,M1,S1,0,2015-06-30\n"
                           "F1,M1,S2,10,2015-06-30\n"
                           "F1,M1,S2,20,2015-06-30\n");
    ParseReport report;
    auto records = parse_holdings(path.string(), report);
    REQUIRE(records.size() == 1);
    CHECK(records[0].market_value == 1000);
    CHECK(report.rejected == 2);
    CHECK(report.rejections[0].reason == "zero value dropped");
    CHECK(report.rejections[1].reason == "duplicate record");
    fs::remove(path);
}

TEST_CASE("parse_holdings requires the schema columns") {
    auto path = write_temp("holdings_noschema.csv", "fund,stock,value\nF1,S1,10\n");
    ParseReport report;
    CHECK_THROWS_WITH(parse_holdings(path.string(), report),
                      Catch::Matchers::ContainsSubstring("missing required column"));
    fs::remove(path);
}

TEST_CASE("aggregate_by_manager sums member funds exactly") {
    std::vector<HoldingRecord> records{{"F1", "M1", "S1", 10000, "2015-06-30"},
                                       {"F2", "M1", "S1", 5000, "2015-06-30"}};
    auto agg = aggregate_by_manager(records);
    REQUIRE(agg.size() == 1);
    CHECK(agg[0].manager_id == "M1");
    CHECK(agg[0].stock_id == "S1");
    CHECK(agg[0].market_value == 15000);

    auto single = aggregate_by_manager({{"F1", "M1", "S1", 10000, "2015-06-30"}});
    REQUIRE(single.size() == 1);
    CHECK(single[0].market_value == 10000);
}

TEST_CASE("aggregation is permutation-invariant and conserves value") {
    std::mt19937_64 gen(7);
    std::vector<HoldingRecord> records;
    Cents total = 0;
    for (int i = 0; i < 200; ++i) {
        HoldingRecord r;
        r.fund_id = "F" + std::to_string(i);
        r.manager_id = "M" + std::to_string(gen() % 13);
        r.stock_id = "S" + std::to_string(gen() % 29);
        r.market_value = static_cast<Cents>(1 + gen() % 100000);
        r.as_of_date = "2015-06-30";
        records.push_back(r);
        total += r.market_value;
    }
    auto agg1 = aggregate_by_manager(records);
    std::shuffle(records.begin(), records.end(), gen);
    auto agg2 = aggregate_by_manager(records);
    REQUIRE(agg1.size() == agg2.size());
    Cents agg_total = 0;
    for (std::size_t i = 0; i < agg1.size(); ++i) {
        CHECK(agg1[i].manager_id == agg2[i].manager_id);
        CHECK(agg1[i].stock_id == agg2[i].stock_id);
        CHECK(agg1[i].market_value == agg2[i].market_value);
        agg_total += agg1[i].market_value;
    }
    CHECK(agg_total == total);
}

TEST_CASE("normalized holdings round-trip to identical records") {
    auto path = write_temp("holdings_roundtrip.csv",
                           "fund_id,manager_id,stock_id,market_value,as_of_date\n"
                           "F1,M1,S1,100.25,2015-06-30\n"
                           "F2,M2,S2,7,2015-06-30\n");
    ParseReport report;
    auto records = parse_holdings(path.string(), report);
    auto out_path = fs::temp_directory_path() / "holdings_normalized.csv";
    {
        CsvWriter w(out_path.string());
        w.row({"fund_id", "manager_id", "stock_id", "market_value", "as_of_date"});
        for (const auto& r : records)
            w.row({r.fund_id, r.manager_id, r.stock_id, format_cents(r.market_value), r.as_of_date});
    }
    ParseReport report2;
    auto reparsed = parse_holdings(out_path.string(), report2);
    REQUIRE(reparsed.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(reparsed[i].fund_id == records[i].fund_id);
        CHECK(reparsed[i].market_value == records[i].market_value);
    }
    fs::remove(path);
    fs::remove(out_path);
}

TEST_CASE("parse_minute_bars applies the session calendar") {
    SessionCalendar cal;
    std::string content = "stock_id,date,time,last_price\n";
    // full 240-minute session for S1
    for (int t = 0; t < 240; ++t)
        content += "S1,2015-06-26," + cal.label_of(t) + ",10\n";
    // S2: one lunch tick (discarded) and 230 in-session ticks
    content += "S2,2015-06-26,12:00,99\n";
    for (int t = 0; t < 230; ++t)
        content += "S2,2015-06-26," + cal.label_of(t) + ",20\n";
    auto bars_path = write_temp("bars_basic.csv", content);
    auto eod_path = write_temp("eod_basic.csv",
                               "stock_id,date,close\nS1,2015-06-25,10\nS2,2015-06-25,20\n");
    ParseReport report;
    EodTable eod = parse_end_of_day(eod_path.string(), report);
    auto series = parse_minute_bars(bars_path.string(), cal, eod, report);
    REQUIRE(series.size() == 2);
    CHECK(series[0].stock_id == "S1");
    CHECK(series[0].missing_minutes == 0);
    CHECK(series[0].prev_close == 10.0);
    CHECK(series[1].stock_id == "S2");
    CHECK(series[1].missing_minutes == 10);
    // the lunch tick was rejected with a reason
    bool found = false;
    for (const auto& r : report.rejections)
        if (r.reason == "outside session") found = true;
    CHECK(found);
    fs::remove(bars_path);
    fs::remove(eod_path);
}

TEST_CASE("series without prev_close is flagged unusable") {
    SessionCalendar cal;
    auto bars_path = write_temp("bars_noprev.csv",
                                "stock_id,date,time,last_price\nS9,2015-06-26,09:30,5\n");
    auto eod_path = write_temp("eod_noprev.csv", "stock_id,date,close\nS9,2015-06-26,5\n");
    ParseReport report;
    EodTable eod = parse_end_of_day(eod_path.string(), report);
    auto series = parse_minute_bars(bars_path.string(), cal, eod, report);
    REQUIRE(series.size() == 1);
    CHECK_FALSE(series[0].has_prev_close());   // same-day close is not a prior close
    CHECK_FALSE(series[0].usable());
    fs::remove(bars_path);
    fs::remove(eod_path);
}

TEST_CASE("eod table prior-close lookup") {
    EodTable t;
    t.add("S1", "2015-06-24", 9.0);
    t.add("S1", "2015-06-25", 10.0);
    t.add("S1", "2015-06-26", 9.3);
    CHECK(t.prev_close("S1", "2015-06-26") == 10.0);
    CHECK(t.prev_close("S1", "2015-06-25") == 9.0);
    CHECK(std::isnan(t.prev_close("S1", "2015-06-24")));
    CHECK(t.close_on("S1", "2015-06-26") == 9.3);
    CHECK(std::isnan(t.close_on("S2", "2015-06-26")));
}
