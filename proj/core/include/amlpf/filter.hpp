#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "amlpf/model.hpp"
#include "amlpf/resample.hpp"
#include "amlpf/scheme.hpp"

namespace amlpf {

// y_1..y_n stored row-major; operator[] is zero-based (index 0 is y_1).
struct ObservationSequence {
    std::size_t obs_dim = 1;
    std::vector<double> values;

    std::size_t size() const noexcept { return obs_dim == 0 ? 0 : values.size() / obs_dim; }
    std::span<const double> operator[](std::size_t k) const {
        return {values.data() + k * obs_dim, obs_dim};
    }
    void push_back(std::span<const double> y) { values.insert(values.end(), y.begin(), y.end()); }
};

struct TestFunction {
    std::string name;
    std::function<double(std::span<const double>)> eval;
};

// "x<i>" is the i-th coordinate (one-based), "x<i>_sq" its square.
TestFunction test_function(const std::string& name);
std::vector<TestFunction> test_functions(const std::vector<std::string>& names);

struct ResamplePolicy {
    enum class Mode { every_step, adaptive };

    Mode mode = Mode::adaptive;
    double threshold_fraction = 0.5;

    void validate() const;
    bool should_resample(double ess_value, std::size_t n) const;
};

std::string to_string(ResamplePolicy::Mode mode);
ResamplePolicy::Mode resample_mode_from_string(const std::string& s);

// Particles at one time: N x d states, log-weights accumulated since the
// last resampling event.
struct WeightedEnsemble {
    std::size_t dim = 1;
    std::vector<double> states;
    std::vector<double> log_weights;

    std::size_t size() const noexcept { return log_weights.size(); }
    std::span<const double> state(std::size_t i) const { return {states.data() + i * dim, dim}; }
};

// sum_i W_i phi(x_i) with W the normalized weights.
double filter_estimate(const WeightedEnsemble& ensemble, const TestFunction& phi);

// Adds log of the mean unnormalized weight, (1/N) sum_i exp(lw_i), to a
// log normalizing-constant accumulator.
double nc_update(double log_accumulator, std::span<const double> log_weights);

// Per-time record of a single-level filter. Index k - 1 holds time k.
struct FilterOutput {
    int level = 0;
    std::size_t particles = 0;
    std::vector<std::string> phi_names;
    std::vector<std::vector<double>> estimates;  // [time][phi]
    std::vector<double> log_nc;                  // log p_hat(y_1..y_k)
    std::vector<std::uint64_t> cumulative_cost;
    std::vector<bool> resampled;
    std::uint64_t cost = 0;  // discretization substeps, summed over particles

    std::size_t horizon() const noexcept { return log_nc.size(); }
    std::vector<int> resample_times() const;  // one-based
};

struct MarginalTrace {
    std::vector<std::vector<double>> estimates;
    std::vector<double> log_nc;
};

// Output of a coupled filter at level l. `anti` is empty for the Euler pair.
struct CoupledFilterOutput {
    int level = 0;
    std::size_t particles = 0;
    bool antithetic = true;
    std::vector<std::string> phi_names;
    MarginalTrace fine;
    MarginalTrace coarse;
    MarginalTrace anti;
    // 1/2 (fine + anti) - coarse, or fine - coarse for the Euler pair.
    std::vector<std::vector<double>> differences;
    std::vector<std::uint64_t> cumulative_cost;
    std::vector<bool> resampled;
    std::uint64_t cost = 0;

    std::size_t horizon() const noexcept { return differences.size(); }
    std::vector<int> resample_times() const;
};

enum class Kernel { milstein, euler };

// Bootstrap particle filter at one level. Randomness is keyed by
// (seed, time, particle), so output is independent of `threads`.
FilterOutput pf_run(const StateSpaceModel& ssm, const ObservationSequence& obs, Level level,
                    std::size_t n_particles, const ResamplePolicy& policy,
                    std::span<const TestFunction> phis, std::uint64_t seed,
                    unsigned threads = 1, Kernel kernel = Kernel::milstein);

// Coupled filter over (fine, coarse, antithetic) triples driven by the
// antithetic truncated Milstein scheme and resampled jointly. Adaptive
// resampling is triggered by the coarse marginal's ESS.
CoupledFilterOutput cpf_run(const StateSpaceModel& ssm, const ObservationSequence& obs,
                            Level level, std::size_t n_particles, const ResamplePolicy& policy,
                            std::span<const TestFunction> phis, std::uint64_t seed,
                            unsigned threads = 1);

// Synchronously coupled Euler pair with 2-marginal coupled resampling.
CoupledFilterOutput euler_cpf_run(const StateSpaceModel& ssm, const ObservationSequence& obs,
                                  Level level, std::size_t n_particles,
                                  const ResamplePolicy& policy, std::span<const TestFunction> phis,
                                  std::uint64_t seed, unsigned threads = 1);

// Closed-form costs (substeps) of a run over n observations.
std::uint64_t pf_cost(std::size_t n_obs, std::size_t n_particles, Level level);
std::uint64_t cpf_cost(std::size_t n_obs, std::size_t n_particles, Level level);
std::uint64_t euler_cpf_cost(std::size_t n_obs, std::size_t n_particles, Level level);

}  // namespace amlpf
