#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "stocknet/herding.hpp"
#include "stocknet/network.hpp"

using namespace stocknet;

namespace {

// Independent oracle for the one-tailed paired t test: the statistic from
// long-double accumulation and the p-value by Simpson integration of the
// Student-t density (no shared code with the implementation path).
struct OracleT {
    long double t;
    long double p_left;
};

long double t_pdf(long double x, long double df) {
    const long double c = std::lgamma((df + 1.0L) / 2.0L) - std::lgamma(df / 2.0L) -
                          0.5L * std::log(df * std::acos(-1.0L));
    return std::exp(c - ((df + 1.0L) / 2.0L) * std::log1p(x * x / df));
}

OracleT oracle_paired_t(const std::vector<double>& low, const std::vector<double>& high) {
    const std::size_t n = low.size();
    long double mean = 0.0L;
    for (std::size_t i = 0; i < n; ++i) mean += static_cast<long double>(low[i]) - high[i];
    mean /= n;
    long double ss = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        const long double d = static_cast<long double>(low[i]) - high[i] - mean;
        ss += d * d;
    }
    const long double sd = std::sqrt(ss / (n - 1));
    const long double t = mean / (sd / std::sqrt(static_cast<long double>(n)));
    // Simpson integral of the pdf over [0, |t|]
    const long double df = static_cast<long double>(n - 1);
    const int steps = 20000;
    const long double h = std::abs(t) / steps;
    long double integral = t_pdf(0.0L, df) + t_pdf(std::abs(t), df);
    for (int i = 1; i < steps; ++i) integral += t_pdf(i * h, df) * (i % 2 ? 4.0L : 2.0L);
    integral *= h / 3.0L;
    return {t, t < 0 ? 0.5L - integral : 0.5L + integral};
}

BipartiteGraph small_market() {
    std::vector<AggregatedHolding> holdings{
        {"m1", "a", 10000, "2015-06-30"}, {"m1", "b", 20000, "2015-06-30"}, {"m1", "c", 30000, "2015-06-30"},
        {"m2", "a", 5000, "2015-06-30"},  {"m2", "b", 10000, "2015-06-30"},
        {"m3", "c", 5000, "2015-06-30"},  {"m3", "d", 7000, "2015-06-30"}};
    return build_bipartite(holdings);
}

} // namespace

TEST_CASE("herding matrix cell semantics") {
    auto b = small_market();
    auto net = project(b);
    auto partition = degree_partition(net);
    auto m = herding_matrices(b, partition, net);

    REQUIRE(m.institutions == std::vector<std::string>{"m1", "m2", "m3"});
    // groups: Q1 = {a, b, d}, Q3 = {c}; Zero, Q2 and Top are empty
    CHECK(m.group_empty[DegreePartition::Zero]);
    CHECK(m.group_empty[DegreePartition::Q2]);
    CHECK(m.group_empty[DegreePartition::Top]);

    // m1 holds a and b of {a, b, d}
    CHECK(m.cells_count[0][DegreePartition::Q1] == Catch::Approx(2.0 / 3.0));
    CHECK(m.cells_value[0][DegreePartition::Q1] == Catch::Approx(150.0));   // (100+200)/2 units
    // m3 holds every stock in Q3 ({c})
    CHECK(m.cells_count[2][DegreePartition::Q3] == Catch::Approx(1.0));
    CHECK(m.cells_value[2][DegreePartition::Q3] == Catch::Approx(50.0));
    // m2 holds nothing in Q3
    CHECK(m.cells_count[1][DegreePartition::Q3] == 0.0);
    CHECK(m.cells_value[1][DegreePartition::Q3] == 0.0);
    // count cells live in [0,1]
    for (const auto& row : m.cells_count)
        for (int g = 0; g < DegreePartition::kGroups; ++g)
            if (!m.group_empty[g]) {
                CHECK(row[g] >= 0.0);
                CHECK(row[g] <= 1.0);
            }
}

TEST_CASE("adjacent tests flag empty groups") {
    auto b = small_market();
    auto net = project(b);
    auto partition = degree_partition(net);
    auto m = herding_matrices(b, partition, net);
    auto tests = adjacent_group_tests(m, false);
    REQUIRE(tests.size() == 4);
    CHECK_FALSE(tests[0].t_stat.defined());   // zero group empty
    CHECK(tests[0].t_stat.reason == "empty group");
}

TEST_CASE("paired t test degenerate inputs") {
    std::vector<double> col(10, 0.4);
    auto identical = paired_one_tailed_t(col, col);
    CHECK_FALSE(identical.t_stat.defined());
    CHECK(identical.t_stat.reason == "zero variance of differences");

    std::vector<double> high(10);
    std::vector<double> low(10);
    for (int i = 0; i < 10; ++i) {
        high[i] = i * 0.25;
        low[i] = high[i] - 1.0;   // constant difference
    }
    auto constant_diff = paired_one_tailed_t(low, high);
    CHECK_FALSE(constant_diff.t_stat.defined());
}

TEST_CASE("paired t matches the integration oracle on random samples") {
    std::mt19937_64 gen(87);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> low(87), high(87);
        const double shift = (trial % 5) * 0.1;
        for (int i = 0; i < 87; ++i) {
            low[i] = noise(gen);
            high[i] = noise(gen) + shift;
        }
        auto ours = paired_one_tailed_t(low, high);
        auto ref = oracle_paired_t(low, high);
        REQUIRE(ours.t_stat.defined());
        CHECK(*ours.t_stat.value == Catch::Approx(static_cast<double>(ref.t)).margin(1e-6));
        CHECK(*ours.p_value.value == Catch::Approx(static_cast<double>(ref.p_left)).margin(1e-6));
    }
}

TEST_CASE("paired t is antisymmetric") {
    std::vector<double> x{0.1, 0.7, 0.3, 0.9, 0.2, 0.5};
    std::vector<double> y{0.4, 0.2, 0.8, 0.1, 0.6, 0.3};
    auto a = paired_one_tailed_t(x, y);
    auto b = paired_one_tailed_t(y, x);
    REQUIRE(a.t_stat.defined());
    REQUIRE(b.t_stat.defined());
    CHECK(*a.t_stat.value == Catch::Approx(-*b.t_stat.value).margin(1e-12));
}

TEST_CASE("portfolio entropy reference points") {
    std::vector<AggregatedHolding> single{{"m", "s1", 5000, "2015-06-30"}};
    auto b1 = build_bipartite(single);
    CHECK(portfolio_entropy(b1, 0) == Catch::Approx(0.0).margin(1e-15));

    std::vector<AggregatedHolding> even{{"m", "s1", 5000, "2015-06-30"}, {"m", "s2", 5000, "2015-06-30"}};
    auto b2 = build_bipartite(even);
    CHECK(portfolio_entropy(b2, 0) == Catch::Approx(std::log(2.0)).epsilon(1e-12));

    std::vector<AggregatedHolding> uniform;
    for (int i = 0; i < 16; ++i)
        uniform.push_back({"m", "s" + std::to_string(i), 777, "2015-06-30"});
    auto b3 = build_bipartite(uniform);
    CHECK(portfolio_entropy(b3, 0) == Catch::Approx(std::log(16.0)).epsilon(1e-12));
}

TEST_CASE("entropy is scale invariant and matches a long-double oracle") {
    std::mt19937_64 gen(5);
    std::vector<AggregatedHolding> base, scaled;
    std::vector<Cents> values;
    for (int i = 0; i < 40; ++i) {
        Cents v = static_cast<Cents>(1 + gen() % 100000);
        values.push_back(v);
        base.push_back({"m", "s" + std::to_string(i), v, "2015-06-30"});
        scaled.push_back({"m", "s" + std::to_string(i), v * 3, "2015-06-30"});
    }
    auto e1 = portfolio_entropy(build_bipartite(base), 0);
    auto e2 = portfolio_entropy(build_bipartite(scaled), 0);
    CHECK(e1 == Catch::Approx(e2).epsilon(1e-12));

    long double total = 0.0L;
    for (Cents v : values) total += v;
    long double ref = 0.0L;
    for (Cents v : values) {
        const long double p = v / total;
        ref -= p * std::log(p);
    }
    CHECK(e1 == Catch::Approx(static_cast<double>(ref)).margin(1e-6));
}

TEST_CASE("absolute loss reference points") {
    std::vector<AggregatedHolding> holdings{{"m", "s1", 100000, "2015-06-30"},   // 1000 units
                                            {"m", "s2", 50000, "2015-06-30"}};   // 500 units
    auto b = build_bipartite(holdings);

    std::unordered_map<std::string, double> zero{{"s1", 0.0}, {"s2", 0.0}};
    CHECK(absolute_loss(b, 0, zero).loss == Catch::Approx(0.0));

    std::unordered_map<std::string, double> single{{"s1", -0.10}, {"s2", 0.0}};
    CHECK(absolute_loss(b, 0, single).loss == Catch::Approx(100.0));

    std::unordered_map<std::string, double> mixed{{"s1", -0.10}, {"s2", 0.04}};
    auto r = absolute_loss(b, 0, mixed);
    CHECK(r.loss == Catch::Approx(80.0));
    CHECK(r.stocks_used == 2);

    std::unordered_map<std::string, double> partial{{"s1", -0.10}};
    auto r2 = absolute_loss(b, 0, partial);
    CHECK(r2.stocks_missing == 1);
    CHECK(r2.loss == Catch::Approx(100.0));
}
