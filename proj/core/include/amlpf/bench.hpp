#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "amlpf/filter.hpp"
#include "amlpf/multilevel.hpp"

namespace amlpf {

struct Dataset {
    ObservationSequence observations;
    std::vector<Vector> latent;  // X_1..X_n
    bool exact = false;          // latent path from exact transitions
    int level = -1;              // discretization level otherwise
};

struct SimulationFidelity {
    bool prefer_exact = true;  // exact transitions when the model admits them
    int level = 10;            // Milstein level otherwise
};

// True for models with exact unit-time transitions (gbm, linear_gaussian).
bool has_exact_transition(const StateSpaceModel& ssm);

Dataset simulate_data(const StateSpaceModel& ssm, std::size_t horizon,
                      const SimulationFidelity& fidelity, std::uint64_t seed);

struct Allocation {
    double c0 = 1.0;
    double c1 = 1.0;
    double beta = 1.0;  // decay exponent of the level-difference variance
};

enum class Provenance { kalman_exact, high_resolution_pf, high_resolution_amlpf, rao_blackwellized };
std::string to_string(Provenance p);

struct ReferenceValue {
    Provenance provenance = Provenance::kalman_exact;
    std::vector<std::string> phi_names;
    std::vector<std::vector<double>> estimates;     // [time][phi]
    std::vector<std::vector<double>> estimate_se;   // [time][phi]
    std::vector<double> log_nc;                     // log p(y_1..y_k)
    std::vector<double> nc_se;                      // standard error of p(y_1..y_k)
    std::vector<double> mean;                       // Kalman only: filter mean of the
    std::vector<double> variance;                   // (possibly log-transformed) state
    double standard_error = 0.0;                    // RMS of estimate_se over time and phi

    double nc(std::size_t t) const;
};

// Exact filter for linear_gaussian, and for gbm in log coordinates (where
// the model is linear Gaussian). Supports test functions x1 and x1_sq.
// Throws UsageError for other models.
ReferenceValue kalman_reference(const StateSpaceModel& ssm, const ObservationSequence& obs,
                                std::span<const TestFunction> phis);

// True for clark_cameron with test functions among x1, x2, x1_sq, x2_sq.
// Given the X1 path, X2 is Gaussian, so ground_truth runs a particle filter
// on X1 alone with a Kalman filter on X2 per particle.
bool has_conditional_reference(const StateSpaceModel& ssm, std::span<const TestFunction> phis);

struct GroundTruthOptions {
    // pf: `runs` Milstein PFs at `level` with `particles` each. The
    // conditional reference uses the same fields on an X1 grid of 2^level.
    // amlpf: `runs` antithetic multilevel filters on levels min_level..level
    // allocated for `epsilon`; far cheaper at equal precision.
    Method method = Method::pf;
    int level = 8;
    std::size_t particles = 10000;
    int min_level = 2;
    double epsilon = 0.01;
    Allocation allocation;
    std::size_t runs = 20;
    std::uint64_t seed = 0;
    ResamplePolicy policy;
    unsigned threads = 1;
};

// Kalman when applicable, then the conditional reference; otherwise the mean
// of `runs` independent filter runs with per-time standard errors.
ReferenceValue ground_truth(const StateSpaceModel& ssm, const ObservationSequence& obs,
                            std::span<const TestFunction> phis, const GroundTruthOptions& opts);

enum class Target { filter, nc };
std::string to_string(Target t);
Target target_from_string(const std::string& s);

struct BenchRecord {
    Method method = Method::amlpf;
    std::string model;
    Target target = Target::filter;
    int budget_index = 0;
    double mse = 0.0;
    double cost = 0.0;
    std::size_t repeats = 0;
    int min_level = 0;
    int max_level = 0;
    double variance = 0.0;  // across replicates (1/R normalization)
    double bias_sq = 0.0;   // squared distance of the replicate mean to the reference
    double epsilon = 0.0;
    bool low_precision = false;  // fewer than 3 replicates
};

struct Budget {
    double epsilon = 0.1;
    int max_level = 3;
    std::size_t pf_particles = 0;  // 0: ceil(pf_constant / epsilon^2)
};

struct SweepSpec {
    std::vector<Method> methods;
    std::vector<Budget> budgets;
    int min_level = 2;
    Allocation amlpf_allocation{1.0, 1.0, 1.0};
    Allocation mlpf_allocation{1.0, 1.0, 0.5};
    double pf_constant = 1.0;
    std::size_t repeats = 20;
    std::uint64_t master_seed = 0;
    ResamplePolicy policy;
    std::string phi = "x1";
    unsigned threads = 1;
    // Abort when the reference is not at least this many times more precise
    // than the least variable method (only for simulated references).
    double reference_precision_factor = 5.0;
};

std::size_t pf_particles_for(const Budget& b, double pf_constant);

// One record per (method, budget, target). Filter MSE averages the squared
// error of the phi estimate over all times; NC MSE uses the signed estimate
// of p(y_1..y_n) at the final time.
std::vector<BenchRecord> mse_cost_sweep(const StateSpaceModel& ssm,
                                        const ObservationSequence& obs,
                                        const ReferenceValue& reference, const SweepSpec& spec);

struct RateFit {
    double slope = 0.0;
    double standard_error = 0.0;
    double intercept = 0.0;
    std::size_t points = 0;
};

// Least-squares slope of log10(cost) against log10(MSE): the exponent r in
// cost ~ MSE^r. Needs at least three points.
RateFit fit_rate(std::span<const double> cost, std::span<const double> mse);
RateFit fit_rate(std::span<const BenchRecord> records);

}  // namespace amlpf
