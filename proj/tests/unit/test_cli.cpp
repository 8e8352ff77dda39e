#include <filesystem>
#include <sstream>

#include "amlpf/errors.hpp"
#include "amlpf/io.hpp"
#include "commands.hpp"
#include "config.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace amlpf;
using namespace amlpf::cli;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "amlpf");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("amlpf_cli_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) { return read_file(p.string()); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("minimal config resolves to defaults") {
    const auto cfg = parse_config_json(R"({"model": "gbm"})");
    CHECK(cfg.method == Method::amlpf);
    CHECK(cfg.min_level == 3);
    CHECK(cfg.max_level == 7);
    CHECK(cfg.epsilon == 0.05);
    CHECK(cfg.seed == 1);
    CHECK(cfg.allocation_beta() == 1.0);
    const auto resolved = nlohmann::json::parse(resolved_config_json(cfg));
    CHECK_FALSE(resolved.contains("threads"));
    CHECK_FALSE(resolved.contains("output"));
    CHECK(parse_config_json(resolved.dump()).max_level == 7);
    CHECK(resolved_config_json(parse_config_json(resolved.dump())) == resolved_config_json(cfg));
}

TEST_CASE("config blocks and flat keys agree") {
    const auto a = parse_config_json(R"({"model": {"name": "nlm"}, "method": {"name": "mlpf", "levels": [2, 5]}})");
    const auto b = parse_config_json(R"({"model": "nlm", "method": "mlpf", "levels": [2, 5]})");
    CHECK(resolved_config_json(a) == resolved_config_json(b));
    CHECK(a.allocation_beta() == 0.5);
}

TEST_CASE("config errors") {
    const auto bad_levels = parse_config_json(R"({"levels": [5, 3]})");
    try {
        bad_levels.validate("filter");
        FAIL("expected a usage error");
    } catch (const UsageError& e) {
        CHECK(std::string(e.what()) == "L_min < L_max required");
    }
    try {
        parse_config_json(R"({"modle": "gbm"})");
        FAIL("expected a usage error");
    } catch (const UsageError& e) {
        CHECK(std::string(e.what()).find("modle") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_json(R"({"model": {"nmae": "gbm"}})"), UsageError);
    CHECK_THROWS_AS(parse_config_json("[1, 2]"), UsageError);
    CHECK_THROWS_AS(parse_config_json("{"), UsageError);
    CHECK_THROWS_AS(parse_config_json(R"({"model": "heston"})").validate("simulate"), UsageError);
    CHECK_THROWS_AS(parse_config_json(R"({"epsilon": 1.5})").validate("filter"), UsageError);
    CHECK_THROWS_AS(parse_config_json(R"({"repeats": 1})").validate("bench"), UsageError);
}

TEST_CASE("flags override the config file") {
    const auto dir = scratch("override");
    write_file((dir / "cfg.json").string(), R"({"model": "gbm", "seed": 1, "horizon": 3})");
    const auto r = invoke({"simulate", "--config", (dir / "cfg.json").string(), "--seed", "7",
                           "-o", dir.string()});
    REQUIRE(r.code == 0);
    const auto text = slurp(dir / "dataset.csv");
    CHECK(text.find("seed=7 ") != std::string::npos);
    CHECK(parse_dataset_csv(text).observations.size() == 3);
}

TEST_CASE("usage errors exit 2 with one line") {
    auto r = invoke({"filter", "--levels", "5,3", "-o", scratch("levels").string()});
    CHECK(r.code == 2);
    CHECK(r.err.rfind("error multilevel.usage: L_min < L_max required\n", 0) == 0);

    r = invoke({"frobnicate"});
    CHECK(r.code == 2);
    CHECK(r.err.rfind("error cli.usage: unknown subcommand 'frobnicate'", 0) == 0);

    r = invoke({"simulate", "--bogus"});
    CHECK(r.code == 2);

    const auto dir = scratch("unknown_key");
    write_file((dir / "cfg.json").string(), R"({"speed": 3})");
    r = invoke({"simulate", "-c", (dir / "cfg.json").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("speed") != std::string::npos);

    r = invoke({"filter", "--dataset", (dir / "missing.csv").string()});
    CHECK(r.code == 2);
}

TEST_CASE("runtime failures exit 1") {
    const auto dir = scratch("runtime");
    write_file((dir / "data.csv").string(), "k,y_1\n1,0.1\n2,nan\n");
    const auto r = invoke({"filter", "--dataset", (dir / "data.csv").string(), "--method", "pf",
                           "--level", "2", "-N", "20", "-o", dir.string()});
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error ", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
}

TEST_CASE("rates refits a bench CSV") {
    const auto dir = scratch("rates");
    write_file((dir / "bench.csv").string(),
               "# synthetic\nmethod,model,target,mse,cost\n"
               "amlpf,gbm,filter,1e-2,100\namlpf,gbm,filter,1e-3,1000\namlpf,gbm,filter,1e-4,10000\n");
    const auto r = invoke({"rates", "-i", (dir / "bench.csv").string(), "-o", dir.string()});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "rates.json"));
    CHECK(format_double(j["rates"]["gbm"]["amlpf_filter"]["slope"].get<double>()).substr(0, 4) == "-1");
    CHECK(j["rates"]["gbm"]["amlpf_filter"]["slope"].get<double>() == doctest::Approx(-1.0));
    CHECK(invoke({"rates"}).code == 2);
}

TEST_CASE("outputs are byte-identical across runs and thread counts") {
    const auto a = scratch("det_a"), b = scratch("det_b");
    const std::vector<std::string> common{"filter", "--model", "nlm", "--levels", "2,4",
                                          "--epsilon", "0.2", "--horizon", "4", "--seed", "9"};
    auto args_a = common;
    args_a.insert(args_a.end(), {"-j", "1", "-o", a.string()});
    auto args_b = common;
    args_b.insert(args_b.end(), {"-j", "3", "-o", b.string()});
    REQUIRE(invoke(args_a).code == 0);
    REQUIRE(invoke(args_b).code == 0);
    for (const char* f : {"ml.csv", "ml.json", "dataset.csv"}) CHECK(slurp(a / f) == slurp(b / f));
    const auto j = nlohmann::json::parse(slurp(a / "ml.json"));
    CHECK(j["manifest"]["seed"] == 9);
    CHECK(j["manifest"]["config"]["model"]["name"] == "nlm");
}

TEST_CASE("small bench runs end to end") {
    const auto dir = scratch("bench");
    const auto r = invoke({"bench", "--model", "linear_gaussian", "--horizon", "3", "--repeats", "3",
                           "--bench-levels", "3,5", "--bench-min-level", "1", "--eps-scale", "1",
                           "-o", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("amlpf filter slope") != std::string::npos);
    const auto records = parse_bench_records_csv(slurp(dir / "bench.csv"));
    CHECK(records.size() == 3 * 3 * 2);
}

}  // TEST_SUITE
