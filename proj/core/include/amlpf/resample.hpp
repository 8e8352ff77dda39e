#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "amlpf/random.hpp"

namespace amlpf {

// Log-weights with their stably normalized probabilities (max-shifted).
class WeightVector {
public:
    // Throws DegenerateWeights when every entry is -infinity, ContractViolation
    // on NaN or +infinity entries or an empty vector.
    explicit WeightVector(std::vector<double> log_weights);

    static WeightVector from_probabilities(std::span<const double> probabilities);

    std::size_t size() const noexcept { return log_weights_.size(); }
    const std::vector<double>& log_weights() const noexcept { return log_weights_; }
    const std::vector<double>& normalized() const noexcept { return normalized_; }

    // log sum_i exp(log_weights_i)
    double log_sum() const noexcept { return log_sum_; }
    // log (1/N) sum_i exp(log_weights_i)
    double log_mean() const noexcept;

private:
    std::vector<double> log_weights_;
    std::vector<double> normalized_;
    double log_sum_ = 0.0;
};

// 1 / sum_i w_i^2
double ess(const WeightVector& w);

// n i.i.d. zero-based indices with P(i) = w.normalized()[i].
std::vector<std::size_t> multinomial_resample(std::size_t n, const WeightVector& w,
                                              RandomStream& rng);

// Ancestors for K jointly resampled marginals. coupled[i] is set when slot i
// drew its index from the overlap measure, in which case all K agree.
template <std::size_t K>
struct CoupledAncestors {
    std::array<std::vector<std::size_t>, K> ancestors;
    std::vector<bool> coupled;
};

using AncestorTriple = CoupledAncestors<3>;
using AncestorPair = CoupledAncestors<2>;

// sum_i min_j w_j[i]
double overlap_mass(std::span<const WeightVector* const> weights);

// Maximal-coupling-type resampling of three marginals. Per slot: with
// probability equal to the overlap mass, one common index drawn from
// min_j w_j; otherwise independent draws from each residual w_j - min.
// Each marginal of the output is distributed according to its own w_j.
AncestorTriple triple_coupled_resample(const WeightVector& w1, const WeightVector& w2,
                                       const WeightVector& w3, RandomStream& rng);

AncestorPair pair_coupled_resample(const WeightVector& w1, const WeightVector& w2,
                                   RandomStream& rng);

}  // namespace amlpf
