#include "amlpf/multilevel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "amlpf/errors.hpp"

namespace amlpf {

void MLConfig::validate() const {
    if (min_level < 0) throw UsageError("multilevel", "min_level must be non-negative");
    if (!(min_level < max_level)) throw UsageError("multilevel", "L_min < L_max required");
    if (max_level > Level::kMaxIndex) throw UsageError("multilevel", "max_level too large");
    if (particle_counts.size() != static_cast<std::size_t>(max_level - min_level + 1)) {
        throw UsageError("multilevel", "need one particle count per level");
    }
    for (std::size_t n : particle_counts) {
        if (n == 0) throw UsageError("multilevel", "every level needs at least one particle");
    }
}

std::size_t MLConfig::particles(int level) const {
    return particle_counts.at(static_cast<std::size_t>(level - min_level));
}

std::vector<std::size_t> allocate_levels(double epsilon, int min_level, int max_level, double c0,
                                         double c1, double beta) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw UsageError("multilevel", "epsilon must lie in (0, 1)");
    }
    if (min_level < 0 || !(min_level < max_level) || max_level > Level::kMaxIndex) {
        throw UsageError("multilevel", "L_min < L_max required");
    }
    if (!(c0 > 0.0) || !(c1 > 0.0)) {
        throw UsageError("multilevel", "allocation constants must be positive");
    }
    if (!(beta > 0.0 && beta <= 2.0)) {
        throw UsageError("multilevel", "variance decay exponent must lie in (0, 2]");
    }
    const double inv_eps2 = 1.0 / (epsilon * epsilon);
    double span = 0.0;
    for (int l = min_level; l <= max_level; ++l) span += std::pow(Level(l).delta(), 0.5 * (beta - 1.0));
    std::vector<std::size_t> counts;
    counts.push_back(static_cast<std::size_t>(std::ceil(c0 * inv_eps2)));
    for (int l = min_level + 1; l <= max_level; ++l) {
        const double share = std::pow(Level(l).delta(), 0.5 * (beta + 1.0));
        const double n = std::ceil(c1 * inv_eps2 * share * span);
        counts.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(n)));
    }
    return counts;
}

MLConfig make_ml_config(double epsilon, int min_level, int max_level, double c0, double c1,
                        double beta) {
    MLConfig cfg{min_level, max_level,
                 allocate_levels(epsilon, min_level, max_level, c0, c1, beta), c0, c1, beta};
    cfg.validate();
    return cfg;
}

double SignedLog::value() const {
    return sign == 0 ? 0.0 : static_cast<double>(sign) * std::exp(log_abs);
}

SignedLog SignedLog::sum(std::span<const double> coefficients, std::span<const double> logs) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < logs.size(); ++t) {
        if (coefficients[t] != 0.0) top = std::max(top, logs[t]);
    }
    if (top == -std::numeric_limits<double>::infinity()) return {};
    double acc = 0.0;
    for (std::size_t t = 0; t < logs.size(); ++t) {
        if (coefficients[t] != 0.0) acc += coefficients[t] * std::exp(logs[t] - top);
    }
    if (acc == 0.0) return {};
    return {acc > 0.0 ? 1 : -1, top + std::log(std::abs(acc))};
}

std::string to_string(Method m) {
    switch (m) {
        case Method::pf: return "pf";
        case Method::mlpf: return "mlpf";
        case Method::amlpf: return "amlpf";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    if (s == "pf") return Method::pf;
    if (s == "mlpf") return Method::mlpf;
    if (s == "amlpf") return Method::amlpf;
    throw UsageError("multilevel", "unknown method '" + s + "' (expected pf, mlpf or amlpf)");
}

std::uint64_t level_seed(std::uint64_t master_seed, std::uint64_t replicate, int level) {
    return derive_seed(master_seed, {tag(StreamTag::replicate), replicate, tag(StreamTag::level),
                                     static_cast<std::uint64_t>(level)});
}

void combine(MLOutput& out) {
    const std::size_t n = out.base.horizon();
    const std::size_t n_phi = out.phi_names.size();
    out.combined.assign(n, std::vector<double>(n_phi, 0.0));
    out.combined_nc.assign(n, SignedLog{});
    out.total_cost = out.base.cost;
    for (const auto& lvl : out.levels) out.total_cost += lvl.cost;

    std::vector<double> coeffs;
    std::vector<double> logs;
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t p = 0; p < n_phi; ++p) {
            double v = out.base.estimates[t][p];
            for (const auto& lvl : out.levels) v += lvl.differences[t][p];
            out.combined[t][p] = v;
        }
        coeffs.assign(1, 1.0);
        logs.assign(1, out.base.log_nc[t]);
        for (const auto& lvl : out.levels) {
            if (lvl.antithetic) {
                coeffs.insert(coeffs.end(), {0.5, 0.5, -1.0});
                logs.insert(logs.end(), {lvl.fine.log_nc[t], lvl.anti.log_nc[t], lvl.coarse.log_nc[t]});
            } else {
                coeffs.insert(coeffs.end(), {1.0, -1.0});
                logs.insert(logs.end(), {lvl.fine.log_nc[t], lvl.coarse.log_nc[t]});
            }
        }
        out.combined_nc[t] = SignedLog::sum(coeffs, logs);
    }
}

namespace {

MLOutput run_multilevel(Method method, const StateSpaceModel& ssm, const ObservationSequence& obs,
                        const MLConfig& cfg, const ResamplePolicy& policy,
                        std::span<const TestFunction> phis, std::uint64_t master_seed,
                        unsigned threads, std::uint64_t replicate) {
    cfg.validate();
    MLOutput out;
    out.method = method;
    out.config = cfg;
    for (const auto& phi : phis) out.phi_names.push_back(phi.name);
    const Kernel kernel = method == Method::amlpf ? Kernel::milstein : Kernel::euler;

    auto at_level = [](int l, auto&& fn) {
        try {
            return fn();
        } catch (const FilterCollapse& e) {
            throw LevelCollapse(l, e.what());
        } catch (const PropagationError& e) {
            throw LevelCollapse(l, e.what());
        }
    };

    const int lmin = cfg.min_level;
    out.base = at_level(lmin, [&] {
        return pf_run(ssm, obs, Level(lmin), cfg.particles(lmin), policy, phis,
                      level_seed(master_seed, replicate, lmin), threads, kernel);
    });
    for (int l = lmin + 1; l <= cfg.max_level; ++l) {
        out.levels.push_back(at_level(l, [&] {
            const std::uint64_t seed = level_seed(master_seed, replicate, l);
            return method == Method::amlpf
                       ? cpf_run(ssm, obs, Level(l), cfg.particles(l), policy, phis, seed, threads)
                       : euler_cpf_run(ssm, obs, Level(l), cfg.particles(l), policy, phis, seed,
                                       threads);
        }));
    }
    combine(out);
    return out;
}

}  // namespace

MLOutput amlpf_run(const StateSpaceModel& ssm, const ObservationSequence& obs,
                   const MLConfig& cfg, const ResamplePolicy& policy,
                   std::span<const TestFunction> phis, std::uint64_t master_seed,
                   unsigned threads, std::uint64_t replicate) {
    return run_multilevel(Method::amlpf, ssm, obs, cfg, policy, phis, master_seed, threads,
                          replicate);
}

MLOutput mlpf_baseline_run(const StateSpaceModel& ssm, const ObservationSequence& obs,
                           const MLConfig& cfg, const ResamplePolicy& policy,
                           std::span<const TestFunction> phis, std::uint64_t master_seed,
                           unsigned threads, std::uint64_t replicate) {
    return run_multilevel(Method::mlpf, ssm, obs, cfg, policy, phis, master_seed, threads,
                          replicate);
}

}  // namespace amlpf
