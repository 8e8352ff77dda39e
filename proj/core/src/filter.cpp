#include "amlpf/filter.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

#include "amlpf/errors.hpp"
#include "amlpf/parallel.hpp"

namespace amlpf {

TestFunction test_function(const std::string& name) {
    auto bad = [&] {
        return UsageError("filter", "unknown test function '" + name + "' (expected x<i> or x<i>_sq)");
    };
    if (name.size() < 2 || name[0] != 'x') throw bad();
    std::string_view rest(name);
    rest.remove_prefix(1);
    bool square = false;
    if (rest.size() > 3 && rest.substr(rest.size() - 3) == "_sq") {
        square = true;
        rest.remove_suffix(3);
    }
    std::size_t index = 0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), index);
    if (ec != std::errc{} || ptr != rest.data() + rest.size() || index == 0) throw bad();
    const std::size_t i = index - 1;
    if (square) {
        return {name, [i](std::span<const double> x) { return x[i] * x[i]; }};
    }
    return {name, [i](std::span<const double> x) { return x[i]; }};
}

std::vector<TestFunction> test_functions(const std::vector<std::string>& names) {
    std::vector<TestFunction> out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back(test_function(n));
    return out;
}

void ResamplePolicy::validate() const {
    if (!(threshold_fraction > 0.0 && threshold_fraction <= 1.0)) {
        throw UsageError("filter", "resampling threshold must lie in (0, 1]");
    }
}

bool ResamplePolicy::should_resample(double ess_value, std::size_t n) const {
    if (mode == Mode::every_step) return true;
    return ess_value < threshold_fraction * static_cast<double>(n);
}

std::string to_string(ResamplePolicy::Mode mode) {
    return mode == ResamplePolicy::Mode::adaptive ? "adaptive" : "every_step";
}

ResamplePolicy::Mode resample_mode_from_string(const std::string& s) {
    if (s == "adaptive") return ResamplePolicy::Mode::adaptive;
    if (s == "every_step") return ResamplePolicy::Mode::every_step;
    throw UsageError("filter", "unknown resampling mode '" + s + "'");
}

namespace {

double weighted_estimate(std::span<const double> states, std::size_t dim,
                         const std::vector<double>& w, const TestFunction& phi) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] == 0.0) continue;
        s += w[i] * phi.eval(states.subspan(i * dim, dim));
    }
    return s;
}

std::vector<int> times_of(const std::vector<bool>& flags) {
    std::vector<int> out;
    for (std::size_t k = 0; k < flags.size(); ++k) {
        if (flags[k]) out.push_back(static_cast<int>(k) + 1);
    }
    return out;
}

void check_inputs(const StateSpaceModel& ssm, const ObservationSequence& obs,
                  std::size_t n_particles, const ResamplePolicy& policy) {
    ssm.validate();
    if (obs.size() == 0) throw ContractViolation("filter", "need at least one observation");
    if (obs.obs_dim != ssm.observation->obs_dim()) {
        throw ContractViolation("filter", "observation dimension does not match the model");
    }
    if (n_particles == 0) throw ContractViolation("filter", "particle count must be positive");
    policy.validate();
}

WeightVector weights_or_collapse(const std::vector<double>& lw, int time, const char* marginal) {
    try {
        return WeightVector(lw);
    } catch (const DegenerateWeights&) {
        throw FilterCollapse(time, marginal);
    }
}

void gather(std::vector<double>& states, std::size_t dim, const std::vector<std::size_t>& idx) {
    std::vector<double> out(idx.size() * dim);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::copy_n(states.begin() + static_cast<std::ptrdiff_t>(idx[i] * dim), dim,
                    out.begin() + static_cast<std::ptrdiff_t>(i * dim));
    }
    states = std::move(out);
}

std::uint64_t propagate_seed(std::uint64_t seed, std::size_t k, std::size_t i) {
    return derive_seed(seed, {tag(StreamTag::propagate), k, i});
}

std::uint64_t resample_seed(std::uint64_t seed, std::size_t k) {
    return derive_seed(seed, {tag(StreamTag::resample), k});
}

template <std::size_t K>
constexpr std::array<const char*, K> marginal_names() {
    if constexpr (K == 3) {
        return {"fine", "coarse", "antithetic"};
    } else {
        return {"fine", "coarse"};
    }
}

template <std::size_t K>
CoupledFilterOutput run_coupled(const StateSpaceModel& ssm, const ObservationSequence& obs,
                                Level level, std::size_t n, const ResamplePolicy& policy,
                                std::span<const TestFunction> phis, std::uint64_t seed,
                                unsigned threads) {
    static_assert(K == 2 || K == 3);
    check_inputs(ssm, obs, n, policy);
    if (level.index() == 0) throw ContractViolation("filter", "coupled filter needs level >= 1");

    const DiffusionModel& model = *ssm.diffusion;
    const ObservationModel& g = *ssm.observation;
    const std::size_t d = model.dim();
    constexpr auto names = marginal_names<K>();
    constexpr std::size_t kCoarse = 1;

    std::array<std::vector<double>, K> states;
    std::array<std::vector<double>, K> lw;
    std::array<double, K> log_nc_base{};
    for (std::size_t j = 0; j < K; ++j) {
        states[j].resize(n * d);
        for (std::size_t i = 0; i < n; ++i) {
            std::copy(ssm.x0.begin(), ssm.x0.end(), states[j].begin() + static_cast<std::ptrdiff_t>(i * d));
        }
        lw[j].assign(n, 0.0);
    }

    CoupledFilterOutput out;
    out.level = level.index();
    out.particles = n;
    out.antithetic = (K == 3);
    for (const auto& phi : phis) out.phi_names.push_back(phi.name);
    std::array<MarginalTrace*, 3> traces{&out.fine, &out.coarse, &out.anti};

    const std::uint64_t step_cost = (K == 3) ? cpf_cost(1, n, level) : euler_cpf_cost(1, n, level);

    for (std::size_t t = 0; t < obs.size(); ++t) {
        const int time = static_cast<int>(t) + 1;
        const auto y = obs[t];
        parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
            StepWorkspace ws(d);
            GaussianDriver driver(level, d);
            for (std::size_t i = begin; i < end; ++i) {
                RandomStream rng(propagate_seed(seed, static_cast<std::size_t>(time), i));
                driver.redraw(rng);
                std::array<std::span<double>, K> x;
                for (std::size_t j = 0; j < K; ++j) x[j] = {states[j].data() + i * d, d};
                if constexpr (K == 3) {
                    advance_antithetic(model, level, x[0], x[1], x[2], driver, ws);
                } else {
                    advance_euler_pair(model, level, x[0], x[1], driver, ws);
                }
                for (std::size_t j = 0; j < K; ++j) lw[j][i] += g.log_density(x[j], y);
            }
        });

        std::vector<WeightVector> w;
        w.reserve(K);
        for (std::size_t j = 0; j < K; ++j) w.push_back(weights_or_collapse(lw[j], time, names[j]));

        std::vector<double> diff(phis.size());
        for (std::size_t j = 0; j < K; ++j) {
            std::vector<double> est(phis.size());
            for (std::size_t p = 0; p < phis.size(); ++p) {
                est[p] = weighted_estimate(states[j], d, w[j].normalized(), phis[p]);
            }
            traces[j]->estimates.push_back(std::move(est));
            traces[j]->log_nc.push_back(log_nc_base[j] + w[j].log_mean());
        }
        for (std::size_t p = 0; p < phis.size(); ++p) {
            const double fine = out.fine.estimates.back()[p];
            const double coarse = out.coarse.estimates.back()[p];
            if constexpr (K == 3) {
                diff[p] = 0.5 * (fine + out.anti.estimates.back()[p]) - coarse;
            } else {
                diff[p] = fine - coarse;
            }
        }
        out.differences.push_back(std::move(diff));
        out.cost += step_cost;
        out.cumulative_cost.push_back(out.cost);

        const bool resample = policy.should_resample(ess(w[kCoarse]), n);
        out.resampled.push_back(resample);
        if (resample) {
            RandomStream rng(resample_seed(seed, static_cast<std::size_t>(time)));
            CoupledAncestors<K> a;
            if constexpr (K == 3) {
                a = triple_coupled_resample(w[0], w[1], w[2], rng);
            } else {
                a = pair_coupled_resample(w[0], w[1], rng);
            }
            for (std::size_t j = 0; j < K; ++j) {
                gather(states[j], d, a.ancestors[j]);
                lw[j].assign(n, 0.0);
                log_nc_base[j] = traces[j]->log_nc.back();
            }
        }
    }
    return out;
}

}  // namespace

double filter_estimate(const WeightedEnsemble& ensemble, const TestFunction& phi) {
    if (ensemble.states.size() != ensemble.size() * ensemble.dim) {
        throw ContractViolation("filter", "ensemble states do not match its weights");
    }
    const WeightVector w(ensemble.log_weights);
    return weighted_estimate(ensemble.states, ensemble.dim, w.normalized(), phi);
}

double nc_update(double log_accumulator, std::span<const double> log_weights) {
    const WeightVector w(std::vector<double>(log_weights.begin(), log_weights.end()));
    return log_accumulator + w.log_mean();
}

std::vector<int> FilterOutput::resample_times() const { return times_of(resampled); }
std::vector<int> CoupledFilterOutput::resample_times() const { return times_of(resampled); }

std::uint64_t pf_cost(std::size_t n_obs, std::size_t n_particles, Level level) {
    return static_cast<std::uint64_t>(n_obs) * n_particles * level.steps();
}

std::uint64_t cpf_cost(std::size_t n_obs, std::size_t n_particles, Level level) {
    return static_cast<std::uint64_t>(n_obs) * n_particles *
           (level.steps() + level.steps() / 2 + level.steps());
}

std::uint64_t euler_cpf_cost(std::size_t n_obs, std::size_t n_particles, Level level) {
    return static_cast<std::uint64_t>(n_obs) * n_particles * (level.steps() + level.steps() / 2);
}

FilterOutput pf_run(const StateSpaceModel& ssm, const ObservationSequence& obs, Level level,
                    std::size_t n, const ResamplePolicy& policy,
                    std::span<const TestFunction> phis, std::uint64_t seed, unsigned threads,
                    Kernel kernel) {
    check_inputs(ssm, obs, n, policy);
    const DiffusionModel& model = *ssm.diffusion;
    const ObservationModel& g = *ssm.observation;
    const std::size_t d = model.dim();

    std::vector<double> states(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(ssm.x0.begin(), ssm.x0.end(), states.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    std::vector<double> lw(n, 0.0);
    double log_nc_base = 0.0;

    FilterOutput out;
    out.level = level.index();
    out.particles = n;
    for (const auto& phi : phis) out.phi_names.push_back(phi.name);
    const std::uint64_t step_cost = pf_cost(1, n, level);

    for (std::size_t t = 0; t < obs.size(); ++t) {
        const int time = static_cast<int>(t) + 1;
        const auto y = obs[t];
        parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
            StepWorkspace ws(d);
            GaussianDriver driver(level, d);
            for (std::size_t i = begin; i < end; ++i) {
                RandomStream rng(propagate_seed(seed, static_cast<std::size_t>(time), i));
                driver.redraw(rng);
                std::span<double> x(states.data() + i * d, d);
                if (kernel == Kernel::milstein) {
                    advance_milstein(model, level, x, driver, ws);
                } else {
                    advance_euler(model, level, x, driver, ws);
                }
                lw[i] += g.log_density(x, y);
            }
        });

        const WeightVector w = weights_or_collapse(lw, time, "single-level");
        std::vector<double> est(phis.size());
        for (std::size_t p = 0; p < phis.size(); ++p) {
            est[p] = weighted_estimate(states, d, w.normalized(), phis[p]);
        }
        out.estimates.push_back(std::move(est));
        out.log_nc.push_back(log_nc_base + w.log_mean());
        out.cost += step_cost;
        out.cumulative_cost.push_back(out.cost);

        const bool resample = policy.should_resample(ess(w), n);
        out.resampled.push_back(resample);
        if (resample) {
            RandomStream rng(resample_seed(seed, static_cast<std::size_t>(time)));
            gather(states, d, multinomial_resample(n, w, rng));
            lw.assign(n, 0.0);
            log_nc_base = out.log_nc.back();
        }
    }
    return out;
}

CoupledFilterOutput cpf_run(const StateSpaceModel& ssm, const ObservationSequence& obs,
                            Level level, std::size_t n, const ResamplePolicy& policy,
                            std::span<const TestFunction> phis, std::uint64_t seed,
                            unsigned threads) {
    return run_coupled<3>(ssm, obs, level, n, policy, phis, seed, threads);
}

CoupledFilterOutput euler_cpf_run(const StateSpaceModel& ssm, const ObservationSequence& obs,
                                  Level level, std::size_t n, const ResamplePolicy& policy,
                                  std::span<const TestFunction> phis, std::uint64_t seed,
                                  unsigned threads) {
    return run_coupled<2>(ssm, obs, level, n, policy, phis, seed, threads);
}

}  // namespace amlpf
