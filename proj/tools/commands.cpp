#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "amlpf/errors.hpp"
#include "amlpf/io.hpp"
#include "amlpf/parallel.hpp"
#include "amlpf/random.hpp"
#include "json.hpp"

namespace amlpf::cli {

namespace {

using json = nlohmann::ordered_json;

StateSpaceModel model_of(const RunConfig& cfg) {
    ModelSpec spec;
    spec.name = cfg.model;
    spec.params = cfg.params;
    spec.x0 = cfg.x0;
    spec.compensator = cfg.compensator;
    return builtin_model(spec);
}

Manifest manifest_of(const RunConfig& cfg) {
    Manifest m;
    m.config_json = resolved_config_json(cfg);
    m.seed = cfg.seed;
    return m;
}

bool wants(const RunConfig& cfg, const std::string& format) {
    return std::find(cfg.formats.begin(), cfg.formats.end(), format) != cfg.formats.end();
}

std::string output_path(const RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.output_dir);
    return (std::filesystem::path(cfg.output_dir) / name).string();
}

void emit(const RunConfig& cfg, std::ostream& out, const std::string& name,
          const std::string& content) {
    const auto path = output_path(cfg, name);
    write_file(path, content);
    out << "wrote " << path << "\n";
}

// Observations from the configured dataset, or simulated (and written) when
// none is given.
ObservationSequence observations_for(const RunConfig& cfg, const StateSpaceModel& ssm,
                                     std::ostream& out) {
    if (!cfg.dataset.empty()) {
        auto data = parse_dataset_csv(read_file(cfg.dataset));
        if (data.observations.obs_dim != ssm.observation->obs_dim()) {
            throw UsageError("cli", "dataset observation dimension does not match model " +
                                        ssm.name);
        }
        return std::move(data.observations);
    }
    const auto data =
        simulate_data(ssm, cfg.horizon, {cfg.exact, cfg.fidelity_level}, cfg.seed);
    emit(cfg, out, "dataset.csv", dataset_csv(data, manifest_of(cfg)));
    return data.observations;
}

std::string single_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

struct Flags {
    std::optional<std::string> config;
    json overrides = json::object();
};

// Registers every config key as a flag. Values are collected as JSON so that
// flags pass through the same validation as file keys and override them.
void add_flags(CLI::App& app, Flags& flags) {
    app.add_option_function<std::string>(
        "--config,-c", [&flags](const std::string& v) { flags.config = v; },
        "JSON config file");

    auto text = [&](const std::string& flag, const std::string& key, const std::string& help) {
        app.add_option_function<std::string>(
            flag, [&flags, key](const std::string& v) { flags.overrides[key] = v; }, help);
    };
    auto integer = [&](const std::string& flag, const std::string& key, const std::string& help) {
        app.add_option_function<long long>(
            flag, [&flags, key](long long v) { flags.overrides[key] = v; }, help);
    };
    auto real = [&](const std::string& flag, const std::string& key, const std::string& help) {
        app.add_option_function<double>(
            flag, [&flags, key](double v) { flags.overrides[key] = v; }, help);
    };
    auto int_pair = [&](const std::string& flag, const std::string& key, const std::string& help) {
        app.add_option_function<std::string>(
            flag,
            [&flags, key](const std::string& v) {
                json arr = json::array();
                for (const auto& part : split_list(v)) arr.push_back(std::stoi(part));
                flags.overrides[key] = arr;
            },
            help);
    };

    text("--model,-m", "model", "gbm | clark_cameron | nlm | linear_gaussian");
    app.add_option_function<std::vector<std::string>>(
        "--param",
        [&flags](const std::vector<std::string>& items) {
            json params = flags.overrides.value("params", json::object());
            for (const auto& item : items) {
                const auto eq = item.find('=');
                if (eq == std::string::npos) {
                    throw CLI::ValidationError("--param", "expected name=value, got " + item);
                }
                params[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
            }
            flags.overrides["params"] = params;
        },
        "model parameter override name=value (repeatable)");
    app.add_option_function<std::string>(
        "--x0",
        [&flags](const std::string& v) {
            json arr = json::array();
            for (const auto& part : split_list(v)) arr.push_back(std::stod(part));
            flags.overrides["x0"] = arr;
        },
        "initial state, comma separated");
    text("--compensator", "compensator", "diagonal | all_pairs");
    text("--method", "method", "pf | mlpf | amlpf");
    int_pair("--levels", "levels", "L_min,L_max");
    integer("--level", "level", "single-level filter level");
    integer("--particles,-N", "particles", "single-level particle count");
    real("--epsilon", "epsilon", "multilevel accuracy target in (0,1)");
    real("--c0", "c0", "base-level allocation constant");
    real("--c1", "c1", "coupled-level allocation constant");
    real("--beta", "beta", "level variance decay exponent for allocation");
    text("--resample", "resample", "adaptive | every_step");
    real("--threshold", "threshold", "ESS fraction triggering adaptive resampling");
    integer("--horizon,-n", "horizon", "number of observations to simulate");
    text("--dataset", "dataset", "dataset CSV (skips simulation)");
    integer("--fidelity-level", "fidelity_level", "Milstein level for simulated paths");
    app.add_flag_function(
        "--no-exact", [&flags](std::int64_t) { flags.overrides["exact"] = false; },
        "simulate with the Milstein scheme even when exact transitions exist");
    text("--phi", "phi", "test functions, e.g. x1,x1_sq");
    app.add_option_function<std::string>(
        "--seed,-s",
        [&flags](const std::string& v) { flags.overrides["seed"] = v; }, "64-bit master seed");
    integer("--threads,-j", "threads", "worker threads (default AMLPF_THREADS or 1)");
    text("--output,-o", "output", "output directory");
    text("--formats", "formats", "csv,json");
    text("--input,-i", "input", "bench CSV to refit (rates)");
    text("--methods", "methods", "bench methods, e.g. pf,mlpf,amlpf");
    int_pair("--bench-levels", "bench_levels", "first,last L_max of the budget ladder");
    integer("--bench-min-level", "bench_min_level", "L_min of the multilevel budgets");
    real("--eps-scale", "eps_scale", "budget epsilon = eps_scale * 2^-L_max");
    integer("--repeats,-R", "repeats", "replicates per budget");
    real("--amlpf-c0", "amlpf_c0", "");
    real("--amlpf-c1", "amlpf_c1", "");
    real("--mlpf-c0", "mlpf_c0", "");
    real("--mlpf-c1", "mlpf_c1", "");
    real("--pf-constant", "pf_constant", "single-level N = pf_constant / epsilon^2");
    text("--reference-method", "reference_method", "pf | amlpf");
    integer("--reference-runs", "reference_runs", "");
    integer("--reference-particles", "reference_particles", "");
    real("--precision-factor", "precision_factor", "");
}

RunConfig resolve(const Flags& flags) {
    RunConfig cfg;
    if (flags.config) apply_config_json(cfg, read_file(*flags.config));
    if (!flags.overrides.empty()) apply_config_json(cfg, flags.overrides.dump());
    return cfg;
}

}  // namespace

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    const auto ssm = model_of(cfg);
    const auto data = simulate_data(ssm, cfg.horizon, {cfg.exact, cfg.fidelity_level}, cfg.seed);
    emit(cfg, out, "dataset.csv", dataset_csv(data, manifest_of(cfg)));
    return kOk;
}

int cmd_filter(const RunConfig& cfg, std::ostream& out) {
    const auto ssm = model_of(cfg);
    const auto obs = observations_for(cfg, ssm, out);
    const auto phis = test_functions(cfg.phi);
    const unsigned threads = resolve_threads(cfg.threads);
    const Manifest manifest = manifest_of(cfg);
    if (cfg.method == Method::pf) {
        const auto run = pf_run(ssm, obs, Level(cfg.pf_level()), cfg.particles, cfg.policy, phis,
                                cfg.seed, threads);
        if (wants(cfg, "csv")) emit(cfg, out, "filter.csv", filter_output_csv(run, manifest));
        if (wants(cfg, "json")) emit(cfg, out, "filter.json", filter_output_json(run, manifest));
        return kOk;
    }
    const auto ml = make_ml_config(cfg.epsilon, cfg.min_level, cfg.max_level, cfg.c0, cfg.c1,
                                   cfg.allocation_beta());
    const auto run = cfg.method == Method::amlpf
                         ? amlpf_run(ssm, obs, ml, cfg.policy, phis, cfg.seed, threads)
                         : mlpf_baseline_run(ssm, obs, ml, cfg.policy, phis, cfg.seed, threads);
    if (wants(cfg, "csv")) emit(cfg, out, "ml.csv", ml_output_csv(run, manifest));
    if (wants(cfg, "json")) emit(cfg, out, "ml.json", ml_output_json(run, manifest));
    return kOk;
}

SweepSpec sweep_spec(const RunConfig& cfg) {
    const auto& b = cfg.bench;
    SweepSpec spec;
    spec.methods = b.methods;
    for (int L = b.first_level; L <= b.last_level; ++L) {
        spec.budgets.push_back({b.eps_scale * std::ldexp(1.0, -L), L, 0});
    }
    spec.min_level = b.min_level;
    spec.amlpf_allocation = b.amlpf;
    spec.mlpf_allocation = b.mlpf;
    spec.pf_constant = b.pf_constant;
    spec.repeats = b.repeats;
    spec.master_seed = cfg.seed;
    spec.policy = cfg.policy;
    spec.phi = cfg.phi.front();
    spec.threads = resolve_threads(cfg.threads);
    spec.reference_precision_factor = b.precision_factor;
    return spec;
}

GroundTruthOptions reference_options(const RunConfig& cfg, const SweepSpec& spec) {
    const auto& b = cfg.bench;
    GroundTruthOptions ref;
    ref.method = b.reference_method;
    ref.level = b.last_level + b.reference_level_offset;
    ref.min_level = b.min_level;
    ref.epsilon = b.reference_eps_factor * spec.budgets.back().epsilon;
    ref.allocation = b.amlpf;
    ref.runs = b.reference_runs;
    ref.seed = derive_seed(cfg.seed, {tag(StreamTag::reference)});
    ref.policy = cfg.policy;
    ref.threads = spec.threads;
    ref.particles = b.reference_particles;
    if (ref.particles == 0 &&
        has_conditional_reference(model_of(cfg), test_functions({cfg.phi.front()}))) {
        ref.particles = 100000;
    } else if (ref.particles == 0) {
        std::size_t widest = 0;
        for (const auto& budget : spec.budgets) {
            for (const auto& a : {b.amlpf, b.mlpf}) {
                const auto counts = allocate_levels(budget.epsilon, b.min_level, budget.max_level,
                                                    a.c0, a.c1, a.beta);
                widest = std::max(widest, *std::max_element(counts.begin(), counts.end()));
            }
        }
        ref.particles = 50 * widest;
    }
    return ref;
}

int cmd_bench(const RunConfig& cfg, std::ostream& out) {
    const auto ssm = model_of(cfg);
    const auto obs = observations_for(cfg, ssm, out);
    const auto phis = test_functions({cfg.phi.front()});
    const SweepSpec spec = sweep_spec(cfg);
    const GroundTruthOptions ref = reference_options(cfg, spec);
    const auto reference = ground_truth(ssm, obs, phis, ref);
    const auto records = mse_cost_sweep(ssm, obs, reference, spec);

    const Manifest manifest = manifest_of(cfg);
    emit(cfg, out, "bench.csv", bench_records_csv(records, manifest));
    emit(cfg, out, "rates.json", rates_json(records, manifest));
    for (Method m : spec.methods) {
        for (Target t : {Target::filter, Target::nc}) {
            std::vector<BenchRecord> group;
            for (const auto& r : records) {
                if (r.method == m && r.target == t) group.push_back(r);
            }
            if (group.size() < 3) continue;
            const auto fit = fit_rate(group);
            out << to_string(m) << " " << to_string(t) << " slope " << format_double(fit.slope)
                << " se " << format_double(fit.standard_error) << "\n";
        }
    }
    return kOk;
}

int cmd_rates(const RunConfig& cfg, std::ostream& out) {
    const auto records = parse_bench_records_csv(read_file(cfg.input));
    emit(cfg, out, "rates.json", rates_json(records, manifest_of(cfg)));
    return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Antithetic multilevel particle filters for partially observed diffusions",
                 "amlpf"};
    app.require_subcommand(1);
    Flags flags;
    struct Sub {
        const char* name;
        const char* help;
        int (*fn)(const RunConfig&, std::ostream&);
    };
    const Sub subs[] = {
        {"simulate", "simulate a dataset (k, y_1.., x_1..)", cmd_simulate},
        {"filter", "run pf, mlpf or amlpf on a dataset", cmd_filter},
        {"bench", "MSE-versus-cost sweep and fitted rates", cmd_bench},
        {"rates", "refit rates from an existing bench CSV", cmd_rates},
    };
    for (const auto& s : subs) add_flags(*app.add_subcommand(s.name, s.help), flags);

    if (argc > 1 && argv[1][0] != '-' &&
        std::none_of(std::begin(subs), std::end(subs),
                     [&](const Sub& s) { return std::string(argv[1]) == s.name; })) {
        err << "error cli.usage: unknown subcommand '" << argv[1] << "'\n" << app.help();
        return kUsage;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error cli.usage: " << single_line(e.what()) << "\n" << app.help();
        return kUsage;
    } catch (const Error& e) {
        err << "error " << e.code() << ": " << single_line(e.what()) << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error cli.usage: " << single_line(e.what()) << "\n";
        return kUsage;
    }

    const Sub* chosen = nullptr;
    for (const auto& s : subs) {
        if (app.got_subcommand(s.name)) chosen = &s;
    }
    try {
        const RunConfig cfg = resolve(flags);
        cfg.validate(chosen->name);
        return chosen->fn(cfg, out);
    } catch (const UsageError& e) {
        err << "error " << e.code() << ": " << single_line(e.what()) << "\n";
        return kUsage;
    } catch (const Error& e) {
        err << "error " << e.code() << ": " << single_line(e.what()) << "\n";
        return kRuntimeFailure;
    } catch (const std::exception& e) {
        err << "error cli.runtime: " << single_line(e.what()) << "\n";
        return kRuntimeFailure;
    }
}

}  // namespace amlpf::cli
