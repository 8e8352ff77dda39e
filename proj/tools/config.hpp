#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "amlpf/bench.hpp"
#include "amlpf/filter.hpp"
#include "amlpf/model.hpp"
#include "amlpf/multilevel.hpp"

namespace amlpf::cli {

struct BenchConfig {
    std::vector<Method> methods{Method::pf, Method::mlpf, Method::amlpf};
    int first_level = 3;  // budgets run L_max = first_level..last_level
    int last_level = 6;
    int min_level = 2;
    double eps_scale = 0.7;  // epsilon of a budget is eps_scale * 2^-L_max
    std::size_t repeats = 20;
    Allocation amlpf{60.0, 1.0, 1.0};
    Allocation mlpf{25.0, 1.0, 0.5};
    double pf_constant = 1.0;
    Method reference_method = Method::amlpf;
    int reference_level_offset = 2;
    std::size_t reference_particles = 0;  // 0: 50 * max N_l (1e5 for the conditional reference)
    std::size_t reference_runs = 20;
    double reference_eps_factor = 1.0;  // reference epsilon = factor * smallest budget epsilon
    double precision_factor = 5.0;
};

struct RunConfig {
    std::string model = "gbm";
    std::map<std::string, double> params;
    std::optional<Vector> x0;
    Compensator compensator = Compensator::diagonal;

    Method method = Method::amlpf;
    int min_level = 3;
    int max_level = 7;
    std::optional<int> level;  // single-level pf; defaults to max_level
    std::size_t particles = 1000;
    double epsilon = 0.05;
    double c0 = 1.0;
    double c1 = 1.0;
    std::optional<double> beta;  // defaults to 1 (amlpf) or 1/2 (mlpf)

    ResamplePolicy policy;
    std::size_t horizon = 10;
    std::string dataset;  // empty: simulate
    bool exact = true;
    int fidelity_level = 10;
    std::vector<std::string> phi{"x1"};
    std::uint64_t seed = 1;

    BenchConfig bench;
    std::string input;  // rates: bench CSV to refit

    // Not part of the manifest: they never change the numbers.
    unsigned threads = 0;  // 0: AMLPF_THREADS, else 1
    std::string output_dir = ".";
    std::vector<std::string> formats{"csv", "json"};

    int pf_level() const { return level.value_or(max_level); }
    double allocation_beta() const;
    void validate(const std::string& command) const;
};

// Parses a JSON object into a config, starting from defaults. Unknown keys
// raise UsageError naming the key.
RunConfig parse_config_json(const std::string& text);
void apply_config_json(RunConfig& cfg, const std::string& text);

// Canonical resolved config (every default filled in) without the
// run-environment keys threads, output and formats.
std::string resolved_config_json(const RunConfig& cfg);

std::vector<std::string> split_list(const std::string& s);

}  // namespace amlpf::cli
