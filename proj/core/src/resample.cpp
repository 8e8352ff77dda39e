#include "amlpf/resample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "amlpf/errors.hpp"

namespace amlpf {

WeightVector::WeightVector(std::vector<double> log_weights)
    : log_weights_(std::move(log_weights)), normalized_(log_weights_.size()) {
    if (log_weights_.empty()) throw ContractViolation("resample", "empty weight vector");
    double max_lw = -std::numeric_limits<double>::infinity();
    for (double lw : log_weights_) {
        if (std::isnan(lw) || lw == std::numeric_limits<double>::infinity()) {
            throw ContractViolation("resample", "log-weights must be finite or -infinity");
        }
        max_lw = std::max(max_lw, lw);
    }
    if (max_lw == -std::numeric_limits<double>::infinity()) {
        throw DegenerateWeights("every log-weight is -infinity");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < log_weights_.size(); ++i) {
        normalized_[i] = std::exp(log_weights_[i] - max_lw);
        total += normalized_[i];
    }
    for (double& w : normalized_) w /= total;
    log_sum_ = max_lw + std::log(total);
}

WeightVector WeightVector::from_probabilities(std::span<const double> probabilities) {
    std::vector<double> lw(probabilities.size());
    for (std::size_t i = 0; i < lw.size(); ++i) {
        if (probabilities[i] < 0.0) throw ContractViolation("resample", "negative probability");
        lw[i] = std::log(probabilities[i]);
    }
    return WeightVector(std::move(lw));
}

double WeightVector::log_mean() const noexcept {
    return log_sum_ - std::log(static_cast<double>(log_weights_.size()));
}

double ess(const WeightVector& w) {
    double s = 0.0;
    for (double p : w.normalized()) s += p * p;
    return 1.0 / s;
}

std::vector<std::size_t> multinomial_resample(std::size_t n, const WeightVector& w,
                                              RandomStream& rng) {
    if (n == 0) throw ContractViolation("resample", "resample count must be positive");
    const auto& p = w.normalized();
    std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
    std::vector<std::size_t> out(n);
    for (auto& a : out) a = pick(rng.engine());
    return out;
}

double overlap_mass(std::span<const WeightVector* const> weights) {
    const std::size_t n = weights.front()->size();
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double m = weights.front()->normalized()[i];
        for (const WeightVector* w : weights) m = std::min(m, w->normalized()[i]);
        mass += m;
    }
    return mass;
}

namespace {

template <std::size_t K>
CoupledAncestors<K> coupled_resample(const std::array<const WeightVector*, K>& w,
                                     RandomStream& rng) {
    const std::size_t n = w[0]->size();
    for (const WeightVector* wj : w) {
        if (wj->size() != n) {
            throw ContractViolation("resample", "coupled resampling needs equal-length weights");
        }
    }

    std::vector<double> common(n);
    double common_mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double m = w[0]->normalized()[i];
        for (std::size_t j = 1; j < K; ++j) m = std::min(m, w[j]->normalized()[i]);
        common[i] = m;
        common_mass += m;
    }

    std::array<std::vector<double>, K> residual;
    bool residual_empty = false;
    for (std::size_t j = 0; j < K; ++j) {
        residual[j].resize(n);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            residual[j][i] = w[j]->normalized()[i] - common[i];
            total += residual[j][i];
        }
        // A residual can only be empty when w_j coincides with the overlap
        // measure, i.e. all marginals agree and the common mass is one up to
        // rounding.
        if (total <= 0.0) residual_empty = true;
    }
    if (residual_empty) common_mass = 1.0;

    std::discrete_distribution<std::size_t> pick_common;
    if (common_mass > 0.0) pick_common = std::discrete_distribution<std::size_t>(common.begin(), common.end());
    std::array<std::discrete_distribution<std::size_t>, K> pick_residual;
    if (!residual_empty) {
        for (std::size_t j = 0; j < K; ++j) {
            pick_residual[j] =
                std::discrete_distribution<std::size_t>(residual[j].begin(), residual[j].end());
        }
    }

    CoupledAncestors<K> out;
    for (auto& a : out.ancestors) a.resize(n);
    out.coupled.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform();
        if (u < common_mass) {
            const std::size_t a = pick_common(rng.engine());
            for (std::size_t j = 0; j < K; ++j) out.ancestors[j][i] = a;
            out.coupled[i] = true;
        } else {
            for (std::size_t j = 0; j < K; ++j) {
                out.ancestors[j][i] = pick_residual[j](rng.engine());
            }
        }
    }
    return out;
}

}  // namespace

AncestorTriple triple_coupled_resample(const WeightVector& w1, const WeightVector& w2,
                                       const WeightVector& w3, RandomStream& rng) {
    return coupled_resample<3>({&w1, &w2, &w3}, rng);
}

AncestorPair pair_coupled_resample(const WeightVector& w1, const WeightVector& w2,
                                   RandomStream& rng) {
    return coupled_resample<2>({&w1, &w2}, rng);
}

}  // namespace amlpf
