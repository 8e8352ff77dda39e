#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "amlpf/filter.hpp"

namespace amlpf {

struct MLConfig {
    int min_level = 0;
    int max_level = 1;
    // N_l for l = min_level..max_level.
    std::vector<std::size_t> particle_counts;
    double c0 = 1.0;
    double c1 = 1.0;
    double beta = 1.0;

    void validate() const;
    std::size_t particles(int level) const;
};

// N_{Lmin} = ceil(c0 eps^-2) and, for l > Lmin,
//   N_l = max(1, ceil(c1 eps^-2 Delta_l^{(beta+1)/2} K)),  K = sum_{k=Lmin}^{Lmax} Delta_k^{(beta-1)/2},
// where beta is the decay exponent of the level-difference variance. With
// beta = 1 (antithetic coupling) this is c1 eps^-2 Delta_l (Lmax - Lmin + 1);
// beta = 1/2 suits the Euler coupling.
std::vector<std::size_t> allocate_levels(double epsilon, int min_level, int max_level,
                                         double c0 = 1.0, double c1 = 1.0, double beta = 1.0);

MLConfig make_ml_config(double epsilon, int min_level, int max_level, double c0 = 1.0,
                        double c1 = 1.0, double beta = 1.0);

// Signed real held as sign * exp(log_abs); the multilevel normalizing-constant
// estimate is a signed sum of products and may be negative.
struct SignedLog {
    int sign = 0;  // -1, 0 or +1
    double log_abs = 0.0;

    double value() const;

    // sum_t coeff_t * exp(log_t), computed relative to the largest term.
    static SignedLog sum(std::span<const double> coefficients, std::span<const double> logs);
};

enum class Method { pf, mlpf, amlpf };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct MLOutput {
    Method method = Method::amlpf;
    MLConfig config;
    std::vector<std::string> phi_names;
    FilterOutput base;                        // single-level filter at min_level
    std::vector<CoupledFilterOutput> levels;  // min_level + 1 .. max_level
    std::vector<std::vector<double>> combined;  // [time][phi]
    std::vector<SignedLog> combined_nc;         // per time
    std::uint64_t total_cost = 0;

    std::size_t horizon() const noexcept { return combined.size(); }
};

// Seed of the run at `level` within one replicate; independent of the order
// in which levels execute.
std::uint64_t level_seed(std::uint64_t master_seed, std::uint64_t replicate, int level);

// Antithetic multilevel particle filter: a Milstein PF at min_level plus an
// independent antithetic coupled filter at every finer level.
MLOutput amlpf_run(const StateSpaceModel& ssm, const ObservationSequence& obs,
                   const MLConfig& cfg, const ResamplePolicy& policy,
                   std::span<const TestFunction> phis, std::uint64_t master_seed,
                   unsigned threads = 1, std::uint64_t replicate = 0);

// Euler-based multilevel particle filter baseline.
MLOutput mlpf_baseline_run(const StateSpaceModel& ssm, const ObservationSequence& obs,
                           const MLConfig& cfg, const ResamplePolicy& policy,
                           std::span<const TestFunction> phis, std::uint64_t master_seed,
                           unsigned threads = 1, std::uint64_t replicate = 0);

// Recombines base and per-level outputs: estimates by telescoping sum, the
// normalizing constant as base + sum_l (1/2 fine + 1/2 anti - coarse) products.
void combine(MLOutput& out);

}  // namespace amlpf
