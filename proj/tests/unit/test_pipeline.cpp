#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "stocknet/pipeline.hpp"
#include "stocknet/synth.hpp"

using namespace stocknet;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Fixture {
    fs::path root;
    fs::path data_dir;
    fs::path out_dir;
    fs::path config_path;

    explicit Fixture(const std::string& name, int trials = 4) {
        root = fs::temp_directory_path() / ("stocknet_pipeline_" + name);
        fs::remove_all(root);
        data_dir = root / "data";
        out_dir = root / "out";
        config_path = root / "run.cfg";
        SynthParams params;
        params.n_hubs = 3;
        params.n_successors = 12;
        params.n_isolated = 2;
        params.n_investors = 6;
        params.dates = {"2015-06-26"};
        params.seed = 99;
        SynthMarket market = make_synth_market(params);
        write_synth_market(market, data_dir);
        write_synth_config(market, data_dir, out_dir, config_path, 0.5, trials, 1000);
    }

    RunConfig config() const { return parse_config(config_path.string()); }
};

std::map<std::string, std::string> stage_status(const RunManifest& m) {
    std::map<std::string, std::string> s;
    for (const auto& st : m.stages) s[st.name] = st.status;
    return s;
}

} // namespace

TEST_CASE("validate: complete config has no findings") {
    Fixture fx("validate", 10);
    auto cfg = fx.config();
    auto findings = validate(cfg);
    CHECK(findings.empty());
}

TEST_CASE("validate: range and path errors are hard") {
    Fixture fx("validate_bad");
    auto cfg = fx.config();
    cfg.filter_k = 1.2;
    auto findings = validate(cfg);
    REQUIRE(has_errors(findings));
    bool found_k = false;
    for (const auto& f : findings)
        if (f.message.find("filter_k") != std::string::npos) found_k = true;
    CHECK(found_k);

    auto cfg2 = fx.config();
    cfg2.holdings = "/nonexistent/holdings.csv";
    auto findings2 = validate(cfg2);
    REQUIRE(has_errors(findings2));
    bool names_path = false;
    for (const auto& f : findings2)
        if (f.severity == Finding::Severity::Error &&
            f.message.find("/nonexistent/holdings.csv") != std::string::npos)
            names_path = true;
    CHECK(names_path);
}

TEST_CASE("full synthetic run completes every stage and emits the report bundle") {
    Fixture fx("full");
    auto cfg = fx.config();
    REQUIRE_FALSE(has_errors(validate(cfg)));

    Pipeline pipeline(cfg);
    auto manifest = pipeline.run();
    auto status = stage_status(manifest);
    for (const auto& [name, st] : status) {
        INFO(name);
        CHECK(st == "completed");
    }
    CHECK(status.contains("ingest"));
    CHECK(status.contains("network"));
    CHECK(status.contains("metrics"));
    CHECK(status.contains("herding"));
    CHECK(status.contains("timeseries:2015-06-26"));
    CHECK(status.contains("causality:2015-06-26"));
    CHECK(status.contains("report"));

    // full-config bundle: fixed enumeration of data files plus the index
    int csv_files = 0;
    REQUIRE(fs::exists(fx.out_dir / "reports/index.json"));
    for (const auto& entry : fs::directory_iterator(fx.out_dir / "reports"))
        if (entry.path().extension() == ".csv") ++csv_files;
    CHECK(csv_files == Pipeline::kReportFileCount);

    auto index = nlohmann::json::parse(slurp(fx.out_dir / "reports/index.json"));
    CHECK(index.at("files").size() == Pipeline::kReportFileCount);
    CHECK(index.at("omitted").empty());
    REQUIRE(fs::exists(fx.out_dir / "manifest.json"));
}

TEST_CASE("rerunning an unchanged config caches every stage") {
    Fixture fx("cache");
    auto cfg = fx.config();
    Pipeline(cfg).run();
    auto manifest = Pipeline(cfg).run();
    for (const auto& [name, st] : stage_status(manifest)) {
        INFO(name);
        CHECK(st == "cached");
    }
}

TEST_CASE("corrupted artifact triggers recomputation of only its stage") {
    Fixture fx("corrupt");
    auto cfg = fx.config();
    Pipeline(cfg).run();
    {
        std::ofstream out(fx.out_dir / "network/stock_network.netart", std::ios::app);
        out << "tampered\n";
    }
    auto manifest = Pipeline(cfg).run();
    auto status = stage_status(manifest);
    CHECK(status["network"] == "completed");
    CHECK(status["ingest"] == "cached");
    // the regenerated artifact is byte-identical, so dependents stay cached
    CHECK(status["metrics"] == "cached");
    CHECK(status["herding"] == "cached");
    CHECK(status["report"] == "cached");
}

TEST_CASE("deleting a stage output recomputes that stage only") {
    Fixture fx("delete");
    auto cfg = fx.config();
    Pipeline(cfg).run();
    fs::remove(fx.out_dir / "metrics/summary.json");
    auto manifest = Pipeline(cfg).run();
    auto status = stage_status(manifest);
    CHECK(status["metrics"] == "completed");
    CHECK(status["ingest"] == "cached");
    CHECK(status["network"] == "cached");
    CHECK(status["herding"] == "cached");
    CHECK(status["causality:2015-06-26"] == "cached");
}

TEST_CASE("identical configs and inputs produce byte-identical report bundles") {
    Fixture a("det_a", 3);
    Fixture b("det_b", 3);
    Pipeline(a.config()).run();
    Pipeline(b.config()).run();
    int compared = 0;
    for (const auto& entry : fs::directory_iterator(a.out_dir / "reports")) {
        const auto name = entry.path().filename();
        INFO(name.string());
        CHECK(slurp(entry.path()) == slurp(b.out_dir / "reports" / name));
        ++compared;
    }
    CHECK(compared == Pipeline::kReportFileCount + 1);
}

TEST_CASE("skipping the causality stage omits its reports and notes it") {
    Fixture fx("skip");
    {
        std::ofstream out(fx.config_path, std::ios::app);
        out << "skip_stages = causality\n";
    }
    auto cfg = fx.config();
    Pipeline(cfg).run();
    CHECK_FALSE(fs::exists(fx.out_dir / "reports/weight_bin_granger.csv"));
    CHECK_FALSE(fs::exists(fx.out_dir / "reports/hub_granger_summary.csv"));
    auto index = nlohmann::json::parse(slurp(fx.out_dir / "reports/index.json"));
    bool noted = false;
    for (const auto& o : index.at("omitted"))
        if (o.at("reason").get<std::string>().find("causality") != std::string::npos) noted = true;
    CHECK(noted);
}

TEST_CASE("report_only rebuilds the bundle from existing stage outputs") {
    Fixture fx("report_only");
    auto cfg = fx.config();
    Pipeline(cfg).run();
    const std::string before = slurp(fx.out_dir / "reports/network_summary.csv");
    fs::remove(fx.out_dir / "reports/network_summary.csv");
    Pipeline(cfg).report_only();
    CHECK(slurp(fx.out_dir / "reports/network_summary.csv") == before);
}

TEST_CASE("synthetic network has the designed hub structure") {
    Fixture fx("structure");
    auto cfg = fx.config();
    Pipeline(cfg).run();
    auto net = load_network((fx.out_dir / "network/stock_network.netart").string());
    SynthParams params;
    params.n_hubs = 3;
    params.n_successors = 12;
    params.n_isolated = 2;
    params.n_investors = 6;
    params.dates = {"2015-06-26"};
    params.seed = 99;
    auto market = make_synth_market(params);
    auto top = net.top_by_out_degree(3);
    std::set<std::string> top_ids;
    for (int v : top) top_ids.insert(net.nodes()[v]);
    std::set<std::string> hub_ids(market.hub_ids.begin(), market.hub_ids.end());
    CHECK(top_ids == hub_ids);
    // isolated stocks are nodes with no edges at all
    for (const auto& id : market.isolated_ids) {
        const int v = net.node_index(id);
        REQUIRE(v >= 0);
        CHECK(net.out_degree(v) == 0);
        CHECK(net.in_degree(v) == 0);
    }
}
