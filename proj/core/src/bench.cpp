#include "amlpf/bench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "amlpf/errors.hpp"
#include "amlpf/parallel.hpp"

namespace amlpf {

namespace {

struct ScalarLinearForm {
    double drift;      // per unit time
    double sigma;      // per unit time
    double tau2;
    double start;      // initial state in the linear coordinate
    bool log_coords;   // true for gbm: the linear state is log X
};

std::optional<ScalarLinearForm> linear_form(const StateSpaceModel& ssm) {
    if (auto lg = std::dynamic_pointer_cast<const LinearGaussianDiffusion>(ssm.diffusion)) {
        auto obs = std::dynamic_pointer_cast<const MeanGaussianObservation>(ssm.observation);
        if (!obs) return std::nullopt;
        return ScalarLinearForm{lg->theta(), lg->sigma(), obs->tau2(), ssm.x0[0], false};
    }
    if (auto gbm = std::dynamic_pointer_cast<const GbmDiffusion>(ssm.diffusion)) {
        auto obs = std::dynamic_pointer_cast<const LogNormalObservation>(ssm.observation);
        if (!obs || !(ssm.x0[0] > 0.0)) return std::nullopt;
        return ScalarLinearForm{gbm->mu() - 0.5 * gbm->sigma() * gbm->sigma(), gbm->sigma(),
                                obs->tau2(), std::log(ssm.x0[0]), true};
    }
    return std::nullopt;
}

void exact_transition(const StateSpaceModel& ssm, Vector& x, RandomStream& rng) {
    if (auto lg = std::dynamic_pointer_cast<const LinearGaussianDiffusion>(ssm.diffusion)) {
        x[0] += lg->theta() + lg->sigma() * rng.gaussian();
        return;
    }
    auto gbm = std::dynamic_pointer_cast<const GbmDiffusion>(ssm.diffusion);
    const double s = gbm->sigma();
    x[0] *= std::exp(gbm->mu() - 0.5 * s * s + s * rng.gaussian());
}

bool is_clark_cameron(const StateSpaceModel& ssm) {
    return std::dynamic_pointer_cast<const ClarkCameronDiffusion>(ssm.diffusion) != nullptr &&
           std::dynamic_pointer_cast<const MeanGaussianObservation>(ssm.observation) != nullptr;
}

struct ReferenceRun {
    std::vector<std::vector<double>> estimates;  // [time][phi]
    std::vector<SignedLog> nc;
};

// Particle filter on X1 with X2 integrated out. Over a substep of length h
// with X1 endpoints a, b the bridge gives E[int X1^2] = h (a^2 + ab + b^2) / 3
// + h^2 / 6, which is the variance added to X2.
ReferenceRun conditional_run(const StateSpaceModel& ssm, const ObservationSequence& obs,
                             std::span<const TestFunction> phis, Level level, std::size_t n,
                             const ResamplePolicy& policy, std::uint64_t seed) {
    const double tau2 =
        std::dynamic_pointer_cast<const MeanGaussianObservation>(ssm.observation)->tau2();
    const std::size_t steps = level.steps();
    const double h = level.delta();
    const double sqrt_h = std::sqrt(h);
    std::vector<double> x1(n, ssm.x0[0]), m2(n, ssm.x0[1]), p2(n, 0.0), logw(n, 0.0);
    std::vector<double> nx1(n), nm2(n), np2(n);
    RandomStream rng(seed);
    double log_nc_base = 0.0;
    ReferenceRun out;
    for (std::size_t t = 0; t < obs.size(); ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            double a = x1[i], q = 0.0;
            for (std::size_t s = 0; s < steps; ++s) {
                const double b = a + sqrt_h * rng.gaussian();
                q += (a * a + a * b + b * b) / 3.0;
                a = b;
            }
            x1[i] = a;
            p2[i] += h * q + h * h / 6.0 * static_cast<double>(steps);
        }
        const double y = obs[t][0];
        for (std::size_t i = 0; i < n; ++i) {
            const double s = 0.25 * p2[i] + tau2;
            const double r = y - 0.5 * (x1[i] + m2[i]);
            logw[i] += -0.5 * (std::log(2.0 * std::numbers::pi * s) + r * r / s);
            const double gain = 0.5 * p2[i] / s;
            m2[i] += gain * r;
            p2[i] -= 0.5 * gain * p2[i];
        }
        const WeightVector w(logw);
        const double log_nc = log_nc_base + w.log_mean();
        out.nc.push_back({1, log_nc});
        std::vector<double> est(phis.size(), 0.0);
        const auto& wn = w.normalized();
        for (std::size_t p = 0; p < phis.size(); ++p) {
            const auto& name = phis[p].name;
            for (std::size_t i = 0; i < n; ++i) {
                double v;
                if (name == "x1") v = x1[i];
                else if (name == "x1_sq") v = x1[i] * x1[i];
                else if (name == "x2") v = m2[i];
                else v = m2[i] * m2[i] + p2[i];
                est[p] += wn[i] * v;
            }
        }
        out.estimates.push_back(std::move(est));
        if (t + 1 < obs.size() && policy.should_resample(ess(w), n)) {
            const auto idx = multinomial_resample(n, w, rng);
            for (std::size_t i = 0; i < n; ++i) {
                nx1[i] = x1[idx[i]];
                nm2[i] = m2[idx[i]];
                np2[i] = p2[idx[i]];
            }
            x1.swap(nx1);
            m2.swap(nm2);
            p2.swap(np2);
            std::fill(logw.begin(), logw.end(), 0.0);
            log_nc_base = log_nc;
        }
    }
    return out;
}

struct ReplicateResult {
    std::vector<double> estimates;  // per time, phi only
    double nc = 0.0;
    double cost = 0.0;
};

}  // namespace

bool has_exact_transition(const StateSpaceModel& ssm) {
    return std::dynamic_pointer_cast<const LinearGaussianDiffusion>(ssm.diffusion) != nullptr ||
           std::dynamic_pointer_cast<const GbmDiffusion>(ssm.diffusion) != nullptr;
}

Dataset simulate_data(const StateSpaceModel& ssm, std::size_t horizon,
                      const SimulationFidelity& fidelity, std::uint64_t seed) {
    ssm.validate();
    if (horizon == 0) throw UsageError("bench", "horizon must be at least 1");
    Dataset data;
    data.exact = fidelity.prefer_exact && has_exact_transition(ssm);
    const Level level(fidelity.level);
    if (!data.exact) data.level = level.index();
    data.observations.obs_dim = ssm.observation->obs_dim();

    RandomStream rng(derive_seed(seed, {tag(StreamTag::simulate)}));
    Vector x = ssm.x0;
    Vector y(ssm.observation->obs_dim());
    for (std::size_t k = 0; k < horizon; ++k) {
        if (data.exact) {
            exact_transition(ssm, x, rng);
        } else {
            x = milstein_unit(*ssm.diffusion, level, x, rng);
        }
        ssm.observation->sample(x, rng, y);
        data.latent.push_back(x);
        data.observations.push_back(y);
    }
    return data;
}

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::kalman_exact: return "kalman_exact";
        case Provenance::high_resolution_pf: return "high_resolution_pf";
        case Provenance::high_resolution_amlpf: return "high_resolution_amlpf";
        case Provenance::rao_blackwellized: return "rao_blackwellized";
    }
    return "?";
}

double ReferenceValue::nc(std::size_t t) const { return std::exp(log_nc.at(t)); }

ReferenceValue kalman_reference(const StateSpaceModel& ssm, const ObservationSequence& obs,
                                std::span<const TestFunction> phis) {
    const auto form = linear_form(ssm);
    if (!form) {
        throw UsageError("bench", "exact Kalman reference needs the linear_gaussian or gbm model");
    }
    for (const auto& phi : phis) {
        if (phi.name != "x1" && phi.name != "x1_sq") {
            throw UsageError("bench", "Kalman reference supports x1 and x1_sq, not " + phi.name);
        }
    }
    ReferenceValue ref;
    ref.provenance = Provenance::kalman_exact;
    for (const auto& phi : phis) ref.phi_names.push_back(phi.name);

    double m = form->start;
    double v = 0.0;
    double log_ev = 0.0;
    for (std::size_t t = 0; t < obs.size(); ++t) {
        const double y = obs[t][0];
        m += form->drift;
        v += form->sigma * form->sigma;
        const double s = v + form->tau2;
        const double r = y - m;
        log_ev += -0.5 * (std::log(2.0 * std::numbers::pi * s) + r * r / s);
        const double gain = v / s;
        m += gain * r;
        v *= (1.0 - gain);

        std::vector<double> est;
        for (const auto& phi : phis) {
            const bool sq = phi.name == "x1_sq";
            if (form->log_coords) {
                est.push_back(sq ? std::exp(2.0 * m + 2.0 * v) : std::exp(m + 0.5 * v));
            } else {
                est.push_back(sq ? m * m + v : m);
            }
        }
        ref.estimates.push_back(std::move(est));
        ref.estimate_se.emplace_back(phis.size(), 0.0);
        ref.log_nc.push_back(log_ev);
        ref.nc_se.push_back(0.0);
        ref.mean.push_back(m);
        ref.variance.push_back(v);
    }
    return ref;
}

bool has_conditional_reference(const StateSpaceModel& ssm, std::span<const TestFunction> phis) {
    if (!is_clark_cameron(ssm)) return false;
    for (const auto& phi : phis) {
        if (phi.name != "x1" && phi.name != "x2" && phi.name != "x1_sq" && phi.name != "x2_sq") {
            return false;
        }
    }
    return true;
}

ReferenceValue ground_truth(const StateSpaceModel& ssm, const ObservationSequence& obs,
                            std::span<const TestFunction> phis, const GroundTruthOptions& opts) {
    if (linear_form(ssm)) {
        bool supported = true;
        for (const auto& phi : phis) supported &= (phi.name == "x1" || phi.name == "x1_sq");
        if (supported) return kalman_reference(ssm, obs, phis);
    }
    if (opts.runs < 2) throw UsageError("bench", "reference needs at least two runs");
    const bool conditional = has_conditional_reference(ssm, phis);
    if (!conditional && opts.method == Method::mlpf) {
        throw UsageError("bench", "reference method must be pf or amlpf");
    }

    std::vector<ReferenceRun> runs(opts.runs);
    MLConfig cfg;
    if (opts.method == Method::amlpf) {
        cfg = make_ml_config(opts.epsilon, opts.min_level, opts.level, opts.allocation.c0,
                             opts.allocation.c1, opts.allocation.beta);
    }
    parallel_for(opts.runs, opts.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            const std::uint64_t seed = derive_seed(opts.seed, {tag(StreamTag::reference), r});
            ReferenceRun& out = runs[r];
            if (conditional) {
                out = conditional_run(ssm, obs, phis, Level(opts.level), opts.particles,
                                      opts.policy, seed);
            } else if (opts.method == Method::pf) {
                auto run = pf_run(ssm, obs, Level(opts.level), opts.particles, opts.policy, phis,
                                  seed, 1);
                out.estimates = std::move(run.estimates);
                for (double l : run.log_nc) out.nc.push_back({1, l});
            } else {
                auto run = amlpf_run(ssm, obs, cfg, opts.policy, phis, seed, 1, r);
                out.estimates = std::move(run.combined);
                out.nc = std::move(run.combined_nc);
            }
        }
    });

    ReferenceValue ref;
    ref.provenance = conditional               ? Provenance::rao_blackwellized
                     : opts.method == Method::pf ? Provenance::high_resolution_pf
                                                 : Provenance::high_resolution_amlpf;
    for (const auto& phi : phis) ref.phi_names.push_back(phi.name);
    const double R = static_cast<double>(opts.runs);
    double se_sq_total = 0.0;
    for (std::size_t t = 0; t < obs.size(); ++t) {
        std::vector<double> mean(phis.size(), 0.0), se(phis.size(), 0.0);
        for (std::size_t p = 0; p < phis.size(); ++p) {
            for (const auto& run : runs) mean[p] += run.estimates[t][p];
            mean[p] /= R;
            double ss = 0.0;
            for (const auto& run : runs) ss += std::pow(run.estimates[t][p] - mean[p], 2);
            se[p] = std::sqrt(ss / (R - 1.0) / R);
            se_sq_total += se[p] * se[p];
        }
        ref.estimates.push_back(std::move(mean));
        ref.estimate_se.push_back(std::move(se));

        std::vector<double> coeffs, logs;
        for (const auto& run : runs) {
            coeffs.push_back(static_cast<double>(run.nc[t].sign) / R);
            logs.push_back(run.nc[t].sign == 0 ? 0.0 : run.nc[t].log_abs);
        }
        const SignedLog nc_mean = SignedLog::sum(coeffs, logs);
        if (nc_mean.sign <= 0) {
            throw ReferencePrecisionError("reference normalizing constant at time " +
                                          std::to_string(t + 1) + " is not positive");
        }
        double ss = 0.0;
        for (std::size_t r = 0; r < runs.size(); ++r) {
            const double rel = R * coeffs[r] * std::exp(logs[r] - nc_mean.log_abs);
            ss += std::pow(rel - 1.0, 2);
        }
        ref.log_nc.push_back(nc_mean.log_abs);
        ref.nc_se.push_back(std::exp(nc_mean.log_abs) * std::sqrt(ss / (R - 1.0) / R));
    }
    const double cells = static_cast<double>(obs.size() * std::max<std::size_t>(1, phis.size()));
    ref.standard_error = std::sqrt(se_sq_total / cells);
    return ref;
}

std::string to_string(Target t) { return t == Target::filter ? "filter" : "nc"; }

Target target_from_string(const std::string& s) {
    if (s == "filter") return Target::filter;
    if (s == "nc") return Target::nc;
    throw UsageError("bench", "unknown target '" + s + "'");
}

std::size_t pf_particles_for(const Budget& b, double pf_constant) {
    if (b.pf_particles > 0) return b.pf_particles;
    if (!(b.epsilon > 0.0)) throw UsageError("bench", "budget epsilon must be positive");
    return std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(pf_constant / (b.epsilon * b.epsilon))));
}

std::vector<BenchRecord> mse_cost_sweep(const StateSpaceModel& ssm,
                                        const ObservationSequence& obs,
                                        const ReferenceValue& reference, const SweepSpec& spec) {
    if (spec.repeats < 2) throw UsageError("bench", "a sweep needs at least two repeats");
    if (spec.budgets.empty() || spec.methods.empty()) {
        throw UsageError("bench", "a sweep needs at least one method and one budget");
    }
    const auto phis = test_functions({spec.phi});
    const auto phi_it = std::find(reference.phi_names.begin(), reference.phi_names.end(), spec.phi);
    if (phi_it == reference.phi_names.end()) {
        throw UsageError("bench", "reference lacks test function " + spec.phi);
    }
    const std::size_t ref_phi = static_cast<std::size_t>(phi_it - reference.phi_names.begin());
    const std::size_t n = obs.size();
    if (reference.estimates.size() != n) throw UsageError("bench", "reference horizon mismatch");
    const double R = static_cast<double>(spec.repeats);
    const double ref_nc = reference.nc(n - 1);

    std::vector<BenchRecord> records;
    double min_filter_sd = std::numeric_limits<double>::infinity();
    double min_nc_sd = std::numeric_limits<double>::infinity();

    for (Method method : spec.methods) {
        for (std::size_t b = 0; b < spec.budgets.size(); ++b) {
            const Budget& budget = spec.budgets[b];
            const std::uint64_t cell_seed =
                derive_seed(spec.master_seed, {tag(StreamTag::method),
                                               static_cast<std::uint64_t>(method), b});
            std::vector<ReplicateResult> reps(spec.repeats);
            int lmin = budget.max_level;
            MLConfig cfg;
            if (method != Method::pf) {
                const Allocation& a =
                    method == Method::amlpf ? spec.amlpf_allocation : spec.mlpf_allocation;
                cfg = make_ml_config(budget.epsilon, spec.min_level, budget.max_level, a.c0, a.c1,
                                     a.beta);
                lmin = spec.min_level;
            }
            const std::size_t pf_n = pf_particles_for(budget, spec.pf_constant);

            parallel_for(spec.repeats, spec.threads, [&](std::size_t begin, std::size_t end) {
                for (std::size_t r = begin; r < end; ++r) {
                    ReplicateResult& out = reps[r];
                    if (method == Method::pf) {
                        const auto run = pf_run(ssm, obs, Level(budget.max_level), pf_n,
                                                spec.policy, phis,
                                                level_seed(cell_seed, r, budget.max_level), 1);
                        for (std::size_t t = 0; t < n; ++t) out.estimates.push_back(run.estimates[t][0]);
                        out.nc = std::exp(run.log_nc[n - 1]);
                        out.cost = static_cast<double>(run.cost);
                    } else {
                        const auto run = method == Method::amlpf
                                             ? amlpf_run(ssm, obs, cfg, spec.policy, phis, cell_seed, 1, r)
                                             : mlpf_baseline_run(ssm, obs, cfg, spec.policy, phis,
                                                                 cell_seed, 1, r);
                        for (std::size_t t = 0; t < n; ++t) out.estimates.push_back(run.combined[t][0]);
                        out.nc = run.combined_nc[n - 1].value();
                        out.cost = static_cast<double>(run.total_cost);
                    }
                }
            });

            double cost = 0.0;
            for (const auto& rep : reps) cost += rep.cost;
            cost /= R;

            BenchRecord base;
            base.method = method;
            base.model = ssm.name;
            base.budget_index = static_cast<int>(b);
            base.cost = cost;
            base.repeats = spec.repeats;
            base.min_level = lmin;
            base.max_level = budget.max_level;
            base.epsilon = budget.epsilon;
            base.low_precision = spec.repeats < 3;

            // Filter: average over time of the squared error decomposition.
            BenchRecord filter = base;
            filter.target = Target::filter;
            for (std::size_t t = 0; t < n; ++t) {
                double mean = 0.0;
                for (const auto& rep : reps) mean += rep.estimates[t];
                mean /= R;
                const double truth = reference.estimates[t][ref_phi];
                double var = 0.0, mse = 0.0;
                for (const auto& rep : reps) {
                    var += std::pow(rep.estimates[t] - mean, 2);
                    mse += std::pow(rep.estimates[t] - truth, 2);
                }
                filter.variance += var / R;
                filter.mse += mse / R;
                filter.bias_sq += std::pow(mean - truth, 2);
            }
            filter.variance /= static_cast<double>(n);
            filter.mse /= static_cast<double>(n);
            filter.bias_sq /= static_cast<double>(n);
            min_filter_sd = std::min(min_filter_sd, std::sqrt(filter.variance));

            BenchRecord nc = base;
            nc.target = Target::nc;
            double mean = 0.0;
            for (const auto& rep : reps) mean += rep.nc;
            mean /= R;
            for (const auto& rep : reps) {
                nc.variance += std::pow(rep.nc - mean, 2) / R;
                nc.mse += std::pow(rep.nc - ref_nc, 2) / R;
            }
            nc.bias_sq = std::pow(mean - ref_nc, 2);
            min_nc_sd = std::min(min_nc_sd, std::sqrt(nc.variance));

            records.push_back(filter);
            records.push_back(nc);
        }
    }

    if (reference.provenance != Provenance::kalman_exact) {
        const double f = spec.reference_precision_factor;
        if (!(reference.standard_error * f < min_filter_sd)) {
            throw ReferencePrecisionError(
                "filter reference standard error " + std::to_string(reference.standard_error) +
                " is not below 1/" + std::to_string(f) + " of the smallest method sd " +
                std::to_string(min_filter_sd));
        }
        if (!(reference.nc_se.back() * f < min_nc_sd)) {
            throw ReferencePrecisionError(
                "normalizing-constant reference standard error " +
                std::to_string(reference.nc_se.back()) + " is not below 1/" + std::to_string(f) +
                " of the smallest method sd " + std::to_string(min_nc_sd));
        }
    }

    std::stable_sort(records.begin(), records.end(), [](const BenchRecord& a, const BenchRecord& b) {
        if (a.method != b.method) return a.method < b.method;
        if (a.target != b.target) return a.target < b.target;
        return a.budget_index < b.budget_index;
    });
    return records;
}

RateFit fit_rate(std::span<const double> cost, std::span<const double> mse) {
    if (cost.size() != mse.size()) throw UsageError("bench", "cost and MSE lengths differ");
    const std::size_t n = cost.size();
    if (n < 3) throw UsageError("bench", "rate fit needs at least three points");
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(cost[i] > 0.0) || !(mse[i] > 0.0)) {
            throw UsageError("bench", "rate fit needs positive cost and MSE");
        }
        x[i] = std::log10(mse[i]);
        y[i] = std::log10(cost[i]);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw UsageError("bench", "rate fit needs distinct MSE values");
    RateFit fit;
    fit.points = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        rss += std::pow(y[i] - fit.intercept - fit.slope * x[i], 2);
    }
    fit.standard_error = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    return fit;
}

RateFit fit_rate(std::span<const BenchRecord> records) {
    std::vector<double> cost, mse;
    for (const auto& r : records) {
        cost.push_back(r.cost);
        mse.push_back(r.mse);
    }
    return fit_rate(cost, mse);
}

}  // namespace amlpf
