#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <thread>

#include "stocknet/granger.hpp"
#include "stocknet/rng.hpp"

using namespace stocknet;

namespace {

ChangeSeries series_of(const std::string& id, std::vector<double> values) {
    ChangeSeries s;
    s.stock_id = id;
    s.trade_date = "2015-06-26";
    s.changes = std::move(values);
    return s;
}

std::vector<double> white_noise(Rng& rng, int n, double sd = 0.01) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = sd * rng.next_normal();
    return v;
}

} // namespace

TEST_CASE("constant series is skipped as degenerate") {
    GrangerConfig cfg;
    Rng rng(1);
    auto x = series_of("X", white_noise(rng, 240));
    auto y = series_of("Y", std::vector<double>(240, -0.10));   // limit-locked flat
    auto out = ty_granger(x, y, cfg);
    CHECK(out.status == GrangerStatus::Skipped);
    CHECK(out.skip_reason == "degenerate series");
    CHECK(out.status_text() == "skipped(degenerate series)");
}

TEST_CASE("too few joint observations are skipped") {
    GrangerConfig cfg;
    Rng rng(2);
    auto x = series_of("X", white_noise(rng, 30));
    auto y = series_of("Y", white_noise(rng, 30));
    auto out = ty_granger(x, y, cfg);
    CHECK(out.status == GrangerStatus::Skipped);
    CHECK(out.skip_reason == "insufficient data");
}

TEST_CASE("strong lagged dependence is detected") {
    GrangerConfig cfg;
    Rng rng(3);
    auto xv = white_noise(rng, 240, 1.0);
    std::vector<double> yv(xv.size(), 0.0);
    for (std::size_t t = 1; t < xv.size(); ++t) yv[t] = 0.8 * xv[t - 1] + 0.1 * rng.next_normal();
    auto out = ty_granger(series_of("X", xv), series_of("Y", yv), cfg);
    REQUIRE(out.tested());
    CHECK(out.reject);
    CHECK(out.p_value < 1e-6);
    CHECK(out.lag_m >= 1);

    // and the reverse direction is its own computation, not a mirror
    auto rev = ty_granger(series_of("Y", yv), series_of("X", xv), cfg);
    REQUIRE(rev.tested());
    CHECK(rev.wald_stat != out.wald_stat);
}

TEST_CASE("white-noise pairs reject near the nominal rate") {
    GrangerConfig cfg;
    int rejects = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        Rng rng(derive_seed(1000, "unit_size", t));
        auto x = series_of("X", white_noise(rng, 200));
        auto y = series_of("Y", white_noise(rng, 200));
        auto out = ty_granger(x, y, cfg);
        REQUIRE(out.tested());
        if (out.reject) ++rejects;
    }
    const double rate = static_cast<double>(rejects) / trials;
    CHECK(rate > 0.005);
    CHECK(rate < 0.125);   // loose unit-level band; acceptance pins [0.03, 0.07] at 1000 trials
}

TEST_CASE("p-values are invariant under positive affine maps") {
    GrangerConfig cfg;
    Rng rng(7);
    auto xv = white_noise(rng, 220);
    std::vector<double> yv(xv.size(), 0.0);
    for (std::size_t t = 1; t < xv.size(); ++t) yv[t] = 0.3 * xv[t - 1] + 0.01 * rng.next_normal();
    auto base = ty_granger(series_of("X", xv), series_of("Y", yv), cfg);
    REQUIRE(base.tested());

    auto xs = xv;
    auto ys = yv;
    for (auto& v : xs) v = 250.0 * v + 3.5;
    for (auto& v : ys) v = 0.004 * v - 1.25;
    auto mapped = ty_granger(series_of("X", xs), series_of("Y", ys), cfg);
    REQUIRE(mapped.tested());
    CHECK(mapped.lag_m == base.lag_m);
    CHECK(mapped.p_value == Catch::Approx(base.p_value).margin(1e-9));
}

TEST_CASE("alignment drops minutes missing in either series") {
    GrangerConfig cfg;
    cfg.min_valid_points = 50;
    Rng rng(9);
    auto xv = white_noise(rng, 120);
    auto yv = white_noise(rng, 120);
    for (int t = 0; t < 120; t += 3) xv[t] = kMissing;
    for (int t = 1; t < 120; t += 4) yv[t] = kMissing;
    auto out = ty_granger(series_of("X", xv), series_of("Y", yv), cfg);
    CHECK(out.tested());   // still enough joint points (>= 50)
}

TEST_CASE("run_pairs deduplicates, accounts, and is schedule independent") {
    GrangerConfig cfg;
    Rng rng(11);
    ChangeSeriesMap changes;
    for (int i = 0; i < 6; ++i)
        changes.emplace("S" + std::to_string(i), series_of("S" + std::to_string(i), white_noise(rng, 150)));
    changes.emplace("FLAT", series_of("FLAT", std::vector<double>(150, 0.0)));

    std::vector<std::pair<std::string, std::string>> pairs;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            if (i != j) pairs.emplace_back("S" + std::to_string(i), "S" + std::to_string(j));
    pairs.emplace_back("S0", "S1");           // duplicate
    pairs.emplace_back("S0", "FLAT");         // degenerate target
    pairs.emplace_back("S0", "GHOST");        // missing series

    auto r1 = run_pairs(pairs, changes, cfg, 1);
    CHECK(r1.outcomes.size() == 32);          // 30 + FLAT + GHOST after dedup
    CHECK(r1.tested + r1.skipped == r1.outcomes.size());
    CHECK(r1.skipped >= 2);

    auto r4 = run_pairs(pairs, changes, cfg, 4);
    REQUIRE(r4.outcomes.size() == r1.outcomes.size());
    for (std::size_t i = 0; i < r1.outcomes.size(); ++i) {
        CHECK(r1.outcomes[i].source == r4.outcomes[i].source);
        CHECK(r1.outcomes[i].target == r4.outcomes[i].target);
        CHECK(r1.outcomes[i].status_text() == r4.outcomes[i].status_text());
        if (r1.outcomes[i].tested()) {
            CHECK(r1.outcomes[i].p_value == r4.outcomes[i].p_value);   // bit identical
            CHECK(r1.outcomes[i].wald_stat == r4.outcomes[i].wald_stat);
        }
    }

    // both directions of a pair produce two independent outcomes
    auto both = run_pairs({{"S0", "S1"}, {"S1", "S0"}}, changes, cfg, 1);
    CHECK(both.outcomes.size() == 2);

    auto empty = run_pairs({}, changes, cfg, 1);
    CHECK(empty.outcomes.empty());
}

TEST_CASE("weight partition bins edges by nearest-rank thresholds") {
    std::vector<std::string> nodes{"A", "B", "C", "D", "E"};
    std::vector<StockNetwork::Edge> edges;
    // weights 1..10 over distinct ordered pairs
    int k = 0;
    for (int i = 0; i < 5 && k < 10; ++i)
        for (int j = 0; j < 5 && k < 10; ++j)
            if (i != j) edges.push_back({i, j, ++k});
    StockNetwork net(nodes, edges);
    auto wp = weight_partition(net);
    CHECK(wp.thresholds[0] == 4);    // ceil(0.4*10) = 4
    CHECK(wp.thresholds[1] == 7);
    CHECK(wp.thresholds[2] == 9);
    CHECK(wp.bin_of(1) == 0);
    CHECK(wp.bin_of(4) == 0);
    CHECK(wp.bin_of(5) == 1);
    CHECK(wp.bin_of(9) == 2);
    CHECK(wp.bin_of(10) == 3);
}

TEST_CASE("ratio_by_weight_bin matches a hand count") {
    std::vector<std::string> nodes{"A", "B", "C", "D"};
    StockNetwork net(nodes, {{0, 1, 1}, {1, 0, 2}, {2, 3, 9}, {3, 2, 10}});
    auto wp = weight_partition(net);   // thresholds: W0.4=2, W0.7=9, W0.9=10
    std::vector<GrangerOutcome> outcomes(4);
    auto set = [&](int i, const char* s, const char* t, bool tested, bool reject) {
        outcomes[i].source = s;
        outcomes[i].target = t;
        outcomes[i].status = tested ? GrangerStatus::Tested : GrangerStatus::Skipped;
        if (!tested) outcomes[i].skip_reason = "degenerate series";
        outcomes[i].reject = reject;
    };
    set(0, "A", "B", true, true);     // weight 1, bin 0
    set(1, "B", "A", true, false);    // weight 2, bin 0
    set(2, "C", "D", false, false);   // weight 9, bin 1, skipped
    set(3, "D", "C", true, true);     // weight 10, bin 2
    auto bins = ratio_by_weight_bin(outcomes, net, wp);
    REQUIRE(bins.size() == 4);
    CHECK(*bins[0].ratio.value == Catch::Approx(0.5));
    CHECK(bins[1].tested == 0);
    CHECK_FALSE(bins[1].ratio.defined());   // only a skipped edge
    CHECK(bins[1].skipped == 1);
    CHECK(*bins[2].ratio.value == Catch::Approx(1.0));
    CHECK_FALSE(bins[3].ratio.defined());   // empty bin
}

TEST_CASE("hub ratios count rejected over tested successors") {
    std::vector<std::string> nodes{"H", "X", "Y", "Z"};
    StockNetwork net(nodes, {{0, 1, 5}, {0, 2, 5}, {0, 3, 5}});
    std::vector<GrangerOutcome> outcomes(3);
    const char* targets[3] = {"X", "Y", "Z"};
    for (int i = 0; i < 3; ++i) {
        outcomes[i].source = "H";
        outcomes[i].target = targets[i];
        outcomes[i].status = GrangerStatus::Tested;
        outcomes[i].reject = i < 2;   // 2 rejects, 1 fail
    }
    auto hubs = ratio_for_hubs(outcomes, net, 1);
    REQUIRE(hubs.size() == 1);
    CHECK(hubs[0].hub == "H");
    CHECK(*hubs[0].ratio.value == Catch::Approx(2.0 / 3.0));

    // all successors skipped -> missing ratio
    for (auto& o : outcomes) {
        o.status = GrangerStatus::Skipped;
        o.skip_reason = "insufficient data";
    }
    auto none = ratio_for_hubs(outcomes, net, 1);
    CHECK_FALSE(none[0].ratio.defined());
}

TEST_CASE("average_level is deterministic for a fixed seed") {
    GrangerConfig cfg;
    cfg.min_valid_points = 60;
    Rng rng(21);
    ChangeSeriesMap changes;
    for (int i = 0; i < 8; ++i)
        changes.emplace("S" + std::to_string(i), series_of("S" + std::to_string(i), white_noise(rng, 100)));
    auto a = average_level(changes, cfg, 1000, 5, 1);
    auto b = average_level(changes, cfg, 1000, 5, 2);   // worker count must not matter
    REQUIRE(a.ratio.defined());
    REQUIRE(b.ratio.defined());
    CHECK(a.sampled == b.sampled);
    CHECK(*a.ratio.value == *b.ratio.value);
    CHECK(a.exhaustive);   // only 56 ordered pairs exist, sample covers all
}

TEST_CASE("rich_club_granger fills densities from edge outcomes") {
    // hub clique {A, B} with passing edges both ways, C attached
    std::vector<std::string> nodes{"A", "B", "C"};
    StockNetwork net(nodes, {{0, 1, 9}, {1, 0, 9}, {0, 2, 9}, {1, 2, 1}});
    auto curve = rich_club_curve(net, {1, 2, 3});
    std::vector<GrangerOutcome> outcomes(2);
    outcomes[0].source = "A";
    outcomes[0].target = "B";
    outcomes[0].status = GrangerStatus::Tested;
    outcomes[0].reject = true;
    outcomes[1].source = "B";
    outcomes[1].target = "A";
    outcomes[1].status = GrangerStatus::Tested;
    outcomes[1].reject = true;
    rich_club_granger(outcomes, net, curve);
    CHECK_FALSE(curve[0].granger_density.defined());   // r=1
    CHECK(*curve[1].granger_density.value == Catch::Approx(1.0));             // 2/(2*1)
    CHECK(*curve[2].granger_density.value == Catch::Approx(2.0 / 6.0));       // same passes, r=3
    // no passing intra-club edges -> zero
    for (auto& o : outcomes) o.reject = false;
    auto curve2 = rich_club_curve(net, {2});
    rich_club_granger(outcomes, net, curve2);
    CHECK(*curve2[0].granger_density.value == Catch::Approx(0.0));
}
