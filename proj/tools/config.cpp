#include "config.hpp"

#include <filesystem>
#include <functional>
#include <sstream>

#include "amlpf/errors.hpp"
#include "json.hpp"

namespace amlpf::cli {

namespace {

using json = nlohmann::ordered_json;
using Handler = std::function<void(RunConfig&, const json&)>;

[[noreturn]] void bad_value(const std::string& key, const std::string& what) {
    throw UsageError("cli", "config key '" + key + "': " + what);
}

template <class T>
T get_as(const std::string& key, const json& v) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        bad_value(key, "wrong type");
    }
}

std::uint64_t get_seed(const std::string& key, const json& v) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
    if (v.is_string()) {
        try {
            return std::stoull(v.get<std::string>(), nullptr, 0);
        } catch (const std::exception&) {
        }
    }
    bad_value(key, "expected a non-negative 64-bit integer");
}

std::size_t get_count(const std::string& key, const json& v) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) bad_value(key, "expected a count");
    return v.get<std::size_t>();
}

std::vector<std::string> get_names(const std::string& key, const json& v) {
    if (v.is_string()) return split_list(v.get<std::string>());
    return get_as<std::vector<std::string>>(key, v);
}

std::vector<Method> get_methods(const std::string& key, const json& v) {
    std::vector<Method> out;
    for (const auto& name : get_names(key, v)) out.push_back(method_from_string(name));
    return out;
}

std::pair<int, int> get_range(const std::string& key, const json& v) {
    const auto r = get_as<std::vector<int>>(key, v);
    if (r.size() != 2) bad_value(key, "expected [low, high]");
    return {r[0], r[1]};
}

Allocation& bench_alloc(RunConfig& c, const std::string& key) {
    return key.rfind("amlpf", 0) == 0 ? c.bench.amlpf : c.bench.mlpf;
}

const std::map<std::string, Handler>& handlers() {
    static const std::map<std::string, Handler> table = {
        {"model", [](RunConfig& c, const json& v) { c.model = get_as<std::string>("model", v); }},
        {"params",
         [](RunConfig& c, const json& v) {
             c.params = get_as<std::map<std::string, double>>("params", v);
         }},
        {"x0", [](RunConfig& c, const json& v) { c.x0 = get_as<Vector>("x0", v); }},
        {"compensator",
         [](RunConfig& c, const json& v) {
             c.compensator = compensator_from_string(get_as<std::string>("compensator", v));
         }},
        {"method",
         [](RunConfig& c, const json& v) {
             c.method = method_from_string(get_as<std::string>("method", v));
         }},
        {"levels",
         [](RunConfig& c, const json& v) {
             std::tie(c.min_level, c.max_level) = get_range("levels", v);
         }},
        {"level", [](RunConfig& c, const json& v) { c.level = get_as<int>("level", v); }},
        {"particles",
         [](RunConfig& c, const json& v) { c.particles = get_count("particles", v); }},
        {"epsilon", [](RunConfig& c, const json& v) { c.epsilon = get_as<double>("epsilon", v); }},
        {"c0", [](RunConfig& c, const json& v) { c.c0 = get_as<double>("c0", v); }},
        {"c1", [](RunConfig& c, const json& v) { c.c1 = get_as<double>("c1", v); }},
        {"beta", [](RunConfig& c, const json& v) { c.beta = get_as<double>("beta", v); }},
        {"resample",
         [](RunConfig& c, const json& v) {
             c.policy.mode = resample_mode_from_string(get_as<std::string>("resample", v));
         }},
        {"threshold",
         [](RunConfig& c, const json& v) {
             c.policy.threshold_fraction = get_as<double>("threshold", v);
         }},
        {"horizon", [](RunConfig& c, const json& v) { c.horizon = get_count("horizon", v); }},
        {"dataset", [](RunConfig& c, const json& v) { c.dataset = get_as<std::string>("dataset", v); }},
        {"exact", [](RunConfig& c, const json& v) { c.exact = get_as<bool>("exact", v); }},
        {"fidelity_level",
         [](RunConfig& c, const json& v) { c.fidelity_level = get_as<int>("fidelity_level", v); }},
        {"phi", [](RunConfig& c, const json& v) { c.phi = get_names("phi", v); }},
        {"seed", [](RunConfig& c, const json& v) { c.seed = get_seed("seed", v); }},
        {"threads",
         [](RunConfig& c, const json& v) {
             c.threads = static_cast<unsigned>(get_count("threads", v));
         }},
        {"output", [](RunConfig& c, const json& v) { c.output_dir = get_as<std::string>("output", v); }},
        {"formats", [](RunConfig& c, const json& v) { c.formats = get_names("formats", v); }},
        {"input", [](RunConfig& c, const json& v) { c.input = get_as<std::string>("input", v); }},
        // bench
        {"methods",
         [](RunConfig& c, const json& v) { c.bench.methods = get_methods("methods", v); }},
        {"bench_levels",
         [](RunConfig& c, const json& v) {
             std::tie(c.bench.first_level, c.bench.last_level) = get_range("bench_levels", v);
         }},
        {"bench_min_level",
         [](RunConfig& c, const json& v) { c.bench.min_level = get_as<int>("bench_min_level", v); }},
        {"eps_scale",
         [](RunConfig& c, const json& v) { c.bench.eps_scale = get_as<double>("eps_scale", v); }},
        {"repeats", [](RunConfig& c, const json& v) { c.bench.repeats = get_count("repeats", v); }},
        {"amlpf_c0", [](RunConfig& c, const json& v) { bench_alloc(c, "amlpf").c0 = get_as<double>("amlpf_c0", v); }},
        {"amlpf_c1", [](RunConfig& c, const json& v) { bench_alloc(c, "amlpf").c1 = get_as<double>("amlpf_c1", v); }},
        {"amlpf_beta", [](RunConfig& c, const json& v) { bench_alloc(c, "amlpf").beta = get_as<double>("amlpf_beta", v); }},
        {"mlpf_c0", [](RunConfig& c, const json& v) { bench_alloc(c, "mlpf").c0 = get_as<double>("mlpf_c0", v); }},
        {"mlpf_c1", [](RunConfig& c, const json& v) { bench_alloc(c, "mlpf").c1 = get_as<double>("mlpf_c1", v); }},
        {"mlpf_beta", [](RunConfig& c, const json& v) { bench_alloc(c, "mlpf").beta = get_as<double>("mlpf_beta", v); }},
        {"pf_constant",
         [](RunConfig& c, const json& v) { c.bench.pf_constant = get_as<double>("pf_constant", v); }},
        {"reference_method",
         [](RunConfig& c, const json& v) {
             c.bench.reference_method = method_from_string(get_as<std::string>("reference_method", v));
         }},
        {"reference_level_offset",
         [](RunConfig& c, const json& v) {
             c.bench.reference_level_offset = get_as<int>("reference_level_offset", v);
         }},
        {"reference_particles",
         [](RunConfig& c, const json& v) {
             c.bench.reference_particles = get_count("reference_particles", v);
         }},
        {"reference_runs",
         [](RunConfig& c, const json& v) { c.bench.reference_runs = get_count("reference_runs", v); }},
        {"reference_eps_factor",
         [](RunConfig& c, const json& v) {
             c.bench.reference_eps_factor = get_as<double>("reference_eps_factor", v);
         }},
        {"precision_factor",
         [](RunConfig& c, const json& v) {
             c.bench.precision_factor = get_as<double>("precision_factor", v);
         }},
    };
    return table;
}

// Keys a block object may hold, mapped to the flat key they set.
const std::map<std::string, std::map<std::string, std::string>>& blocks() {
    static const std::map<std::string, std::map<std::string, std::string>> table = {
        {"model", {{"name", "model"}, {"params", "params"}, {"x0", "x0"}, {"compensator", "compensator"}}},
        {"method",
         {{"name", "method"}, {"levels", "levels"}, {"level", "level"}, {"particles", "particles"},
          {"epsilon", "epsilon"}, {"c0", "c0"}, {"c1", "c1"}, {"beta", "beta"}}},
        {"policy", {{"mode", "resample"}, {"threshold", "threshold"}}},
        {"data",
         {{"horizon", "horizon"}, {"dataset", "dataset"}, {"exact", "exact"},
          {"fidelity_level", "fidelity_level"}}},
        {"output", {{"dir", "output"}, {"formats", "formats"}}},
        {"bench",
         {{"methods", "methods"}, {"levels", "bench_levels"}, {"min_level", "bench_min_level"},
          {"eps_scale", "eps_scale"}, {"repeats", "repeats"}, {"amlpf_c0", "amlpf_c0"},
          {"amlpf_c1", "amlpf_c1"}, {"amlpf_beta", "amlpf_beta"}, {"mlpf_c0", "mlpf_c0"},
          {"mlpf_c1", "mlpf_c1"}, {"mlpf_beta", "mlpf_beta"}, {"pf_constant", "pf_constant"},
          {"reference_method", "reference_method"},
          {"reference_level_offset", "reference_level_offset"},
          {"reference_particles", "reference_particles"}, {"reference_runs", "reference_runs"},
          {"reference_eps_factor", "reference_eps_factor"},
          {"precision_factor", "precision_factor"}}},
    };
    return table;
}

void apply_key(RunConfig& cfg, const std::string& key, const json& value) {
    const auto& table = handlers();
    auto it = table.find(key);
    if (it == table.end()) throw UsageError("cli", "unknown config key '" + key + "'");
    it->second(cfg, value);
}

json method_names(const std::vector<Method>& methods) {
    json out = json::array();
    for (Method m : methods) out.push_back(to_string(m));
    return out;
}

}  // namespace

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double RunConfig::allocation_beta() const {
    if (beta) return *beta;
    return method == Method::mlpf ? 0.5 : 1.0;
}

void RunConfig::validate(const std::string& command) const {
    ModelSpec spec;
    spec.name = model;
    spec.params = params;
    spec.x0 = x0;
    spec.compensator = compensator;
    builtin_model(spec).validate();
    policy.validate();
    if (horizon == 0) throw UsageError("cli", "horizon must be at least 1");
    if (fidelity_level < 0 || fidelity_level > Level::kMaxIndex) {
        throw UsageError("cli", "fidelity_level out of range");
    }
    if (phi.empty()) throw UsageError("cli", "phi must name at least one test function");
    test_functions(phi);
    if (command == "filter") {
        if (method == Method::pf) {
            if (pf_level() < 0 || pf_level() > Level::kMaxIndex) {
                throw UsageError("cli", "level out of range");
            }
            if (particles == 0) throw UsageError("cli", "particles must be positive");
        } else {
            make_ml_config(epsilon, min_level, max_level, c0, c1, allocation_beta());
        }
    }
    if (command == "bench") {
        if (bench.methods.empty()) throw UsageError("cli", "methods must not be empty");
        if (bench.repeats < 2) throw UsageError("cli", "repeats must be at least 2");
        if (!(bench.first_level <= bench.last_level)) {
            throw UsageError("cli", "bench_levels must be increasing");
        }
        if (!(bench.min_level < bench.first_level)) {
            throw UsageError("cli", "L_min < L_max required");
        }
        if (!(bench.eps_scale > 0.0)) throw UsageError("cli", "eps_scale must be positive");
    }
    if (!dataset.empty() && !std::filesystem::exists(dataset)) {
        throw UsageError("cli", "dataset: no such file " + dataset);
    }
    if (command == "rates") {
        if (input.empty()) throw UsageError("cli", "input: rates needs a bench CSV");
        if (!std::filesystem::exists(input)) throw UsageError("cli", "input: no such file " + input);
    }
}

void apply_config_json(RunConfig& cfg, const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw UsageError("cli", std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw UsageError("cli", "config must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        auto block = blocks().find(key);
        if (block != blocks().end() && value.is_object() && key != "params") {
            for (const auto& [inner, inner_value] : value.items()) {
                auto target = block->second.find(inner);
                if (target == block->second.end()) {
                    throw UsageError("cli", "unknown config key '" + key + "." + inner + "'");
                }
                apply_key(cfg, target->second, inner_value);
            }
            continue;
        }
        apply_key(cfg, key, value);
    }
}

RunConfig parse_config_json(const std::string& text) {
    RunConfig cfg;
    apply_config_json(cfg, text);
    return cfg;
}

std::string resolved_config_json(const RunConfig& cfg) {
    ModelSpec spec;
    spec.name = cfg.model;
    spec.params = cfg.params;
    spec.x0 = cfg.x0;
    spec.compensator = cfg.compensator;
    const auto ssm = builtin_model(spec);

    json doc;
    doc["model"] = {{"name", ssm.name},
                    {"params", ssm.params},
                    {"x0", ssm.x0},
                    {"compensator", to_string(cfg.compensator)}};
    doc["method"] = {{"name", to_string(cfg.method)},
                     {"levels", {cfg.min_level, cfg.max_level}},
                     {"level", cfg.pf_level()},
                     {"particles", cfg.particles},
                     {"epsilon", cfg.epsilon},
                     {"c0", cfg.c0},
                     {"c1", cfg.c1},
                     {"beta", cfg.allocation_beta()}};
    doc["policy"] = {{"mode", to_string(cfg.policy.mode)},
                     {"threshold", cfg.policy.threshold_fraction}};
    doc["data"] = {{"horizon", cfg.horizon},
                   {"dataset", cfg.dataset},
                   {"exact", cfg.exact},
                   {"fidelity_level", cfg.fidelity_level}};
    doc["phi"] = cfg.phi;
    doc["seed"] = cfg.seed;
    const auto& b = cfg.bench;
    doc["bench"] = {{"methods", method_names(b.methods)},
                    {"levels", {b.first_level, b.last_level}},
                    {"min_level", b.min_level},
                    {"eps_scale", b.eps_scale},
                    {"repeats", b.repeats},
                    {"amlpf_c0", b.amlpf.c0},
                    {"amlpf_c1", b.amlpf.c1},
                    {"amlpf_beta", b.amlpf.beta},
                    {"mlpf_c0", b.mlpf.c0},
                    {"mlpf_c1", b.mlpf.c1},
                    {"mlpf_beta", b.mlpf.beta},
                    {"pf_constant", b.pf_constant},
                    {"reference_method", to_string(b.reference_method)},
                    {"reference_level_offset", b.reference_level_offset},
                    {"reference_particles", b.reference_particles},
                    {"reference_runs", b.reference_runs},
                    {"reference_eps_factor", b.reference_eps_factor},
                    {"precision_factor", b.precision_factor}};
    if (!cfg.input.empty()) doc["input"] = cfg.input;
    return doc.dump();
}

}  // namespace amlpf::cli
