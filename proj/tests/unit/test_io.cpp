#include <cmath>
#include <filesystem>

#include "amlpf/errors.hpp"
#include "amlpf/io.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace amlpf;

TEST_SUITE("io") {

TEST_CASE("doubles round-trip") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) CHECK(std::stod(format_double(v)) == v);
    CHECK(format_double(-INFINITY) == "-inf");
}

TEST_CASE("manifest") {
    Manifest m;
    m.config_json = R"({"model":"gbm"})";
    m.seed = 12;
    CHECK(m.config_hash().size() == 16);
    Manifest other = m;
    other.config_json = R"({"model":"nlm"})";
    CHECK(m.config_hash() != other.config_hash());
    // FNV-1a 64 of the empty string is the offset basis.
    CHECK(Manifest{}.config_hash() == "cbf29ce484222325");
    const auto header = m.csv_header();
    CHECK(header.rfind("# amlpf " + std::string(kVersion) + " seed=12 config_hash=", 0) == 0);
    CHECK(header.find("# config={\"model\":\"gbm\"}\n") != std::string::npos);
}

TEST_CASE("dataset round-trip") {
    const auto ssm = builtin_model("clark_cameron");
    const auto data = simulate_data(ssm, 6, {true, 4}, 3);
    const auto text = dataset_csv(data, Manifest{});
    const auto back = parse_dataset_csv(text);
    CHECK(back.observations.values == data.observations.values);
    CHECK(back.latent == data.latent);
    CHECK(text.find("k,y_1,x_1,x_2\n") != std::string::npos);

    CHECK_THROWS_AS(parse_dataset_csv("k,z_1\n1,0\n"), UsageError);
    CHECK_THROWS_AS(parse_dataset_csv("k,y_1\n2,0\n"), UsageError);
    CHECK_THROWS_AS(parse_dataset_csv("k,y_1\n1,0,4\n"), UsageError);
    CHECK_THROWS_AS(parse_dataset_csv("# only comments\n"), UsageError);
    const auto obs_only = parse_dataset_csv("k,y_1\n1,0.5\n2,-1\n");
    CHECK(obs_only.observations.size() == 2);
    CHECK(obs_only.latent.empty());
}

TEST_CASE("bench records round-trip") {
    BenchRecord r;
    r.method = Method::mlpf;
    r.model = "gbm";
    r.target = Target::nc;
    r.budget_index = 2;
    r.mse = 1.0 / 3.0;
    r.cost = 12345.0;
    r.repeats = 20;
    r.min_level = 2;
    r.max_level = 5;
    r.variance = 0.25;
    r.bias_sq = 1e-9;
    r.epsilon = 0.0125;
    const auto back = parse_bench_records_csv(bench_records_csv({r, r}, Manifest{}));
    REQUIRE(back.size() == 2);
    CHECK(back[0].method == r.method);
    CHECK(back[0].target == r.target);
    CHECK(back[0].mse == r.mse);
    CHECK(back[0].cost == r.cost);
    CHECK(back[0].max_level == 5);
    CHECK(back[0].bias_sq == r.bias_sq);
    CHECK_THROWS_AS(parse_bench_records_csv("method,model\npf,gbm\n"), UsageError);
}

TEST_CASE("rates json") {
    std::vector<BenchRecord> recs;
    for (int i = 0; i < 4; ++i) {
        BenchRecord r;
        r.method = Method::amlpf;
        r.model = "gbm";
        r.mse = std::pow(10.0, -i);
        r.cost = 5.0 * std::pow(10.0, 2 * i);
        recs.push_back(r);
    }
    const auto j = nlohmann::json::parse(rates_json(recs, Manifest{}));
    CHECK(j["rates"]["gbm"]["amlpf_filter"]["slope"].get<double>() == doctest::Approx(-2.0));
    CHECK(j["rates"]["gbm"]["amlpf_filter"]["points"].get<int>() == 4);
    CHECK(j["manifest"]["version"] == kVersion);
    recs.pop_back();
    recs.pop_back();
    CHECK(nlohmann::json::parse(rates_json(recs, Manifest{}))["rates"].empty());
}

TEST_CASE("filter outputs carry the manifest") {
    const auto ssm = builtin_model("gbm");
    const auto data = simulate_data(ssm, 3, {}, 1);
    const auto phis = test_functions({"x1"});
    Manifest m;
    m.config_json = R"({"a":1})";
    m.seed = 4;
    const auto pf = pf_run(ssm, data.observations, Level(2), 20, {}, phis, 1);
    const auto csv = filter_output_csv(pf, m);
    CHECK(csv.rfind("# amlpf", 0) == 0);
    const auto j = nlohmann::json::parse(filter_output_json(pf, m));
    CHECK(j["manifest"]["seed"] == 4);
    CHECK(j["manifest"]["config"]["a"] == 1);

    const auto ml = amlpf_run(ssm, data.observations, make_ml_config(0.3, 1, 3), {}, phis, 1);
    const auto mj = nlohmann::json::parse(ml_output_json(ml, m));
    CHECK(mj["levels"].size() == 2);
    CHECK(mj["combined"]["total_cost"].get<std::uint64_t>() == ml.total_cost);
    const auto cp = coupled_output_csv(ml.levels[0], m);
    CHECK(cp.find("\n1,x1,") != std::string::npos);
}

TEST_CASE("file helpers") {
    const auto path = (std::filesystem::temp_directory_path() / "amlpf_io_test.txt").string();
    write_file(path, "abc\n");
    CHECK(read_file(path) == "abc\n");
    std::filesystem::remove(path);
    try {
        read_file(path);
        FAIL("expected a usage error");
    } catch (const UsageError& e) {
        CHECK(e.code() == "io.usage");
    }
}

}  // TEST_SUITE
