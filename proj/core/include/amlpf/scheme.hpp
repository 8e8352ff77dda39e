#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "amlpf/model.hpp"
#include "amlpf/random.hpp"

namespace amlpf {

// Dyadic discretization level: step 2^-l, 2^l steps per unit of time.
class Level {
public:
    static constexpr int kMaxIndex = 62;

    explicit Level(int l);

    int index() const noexcept { return l_; }
    double delta() const noexcept { return 1.0 / static_cast<double>(steps()); }
    std::uint64_t steps() const noexcept { return std::uint64_t{1} << l_; }
    Level coarser() const;

    friend bool operator==(Level a, Level b) noexcept { return a.l_ == b.l_; }

private:
    int l_;
};

struct CoupledTriple {
    Vector fine;
    Vector coarse;
    Vector anti;
};

// The 2^l increments Z_1..Z_{2^l}, each N_d(0, delta I), stored contiguously.
// One driver feeds every path of a coupled step.
class GaussianDriver {
public:
    GaussianDriver(Level level, std::size_t dim);
    GaussianDriver(Level level, std::size_t dim, std::vector<double> increments);

    static GaussianDriver draw(Level level, std::size_t dim, RandomStream& rng);
    void redraw(RandomStream& rng);

    Level level() const noexcept { return level_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(level_.steps()); }

    // Zero-based: increment(0) is Z_1.
    std::span<const double> increment(std::size_t k) const {
        return {values_.data() + k * dim_, dim_};
    }
    std::span<const double> values() const noexcept { return values_; }

private:
    Level level_;
    std::size_t dim_;
    std::vector<double> values_;
};

// Scratch buffers for one step of a d-dimensional kernel. Not thread-safe;
// give each worker its own.
struct StepWorkspace {
    explicit StepWorkspace(std::size_t d);

    std::size_t dim() const noexcept { return drift.size(); }

    std::vector<double> drift;
    std::vector<double> beta;
    std::vector<double> jac;
    std::vector<double> bz;
    // Summed increment for coarse steps; the step kernels never write it.
    std::vector<double> zsum;
};

// x <- x + alpha(x) dt + beta(x) z + H_dt(x, z), in place.
void milstein_step(const DiffusionModel& model, std::span<double> x, std::span<const double> z,
                   double dt, StepWorkspace& ws);

// x <- x + alpha(x) dt + beta(x) z, in place.
void euler_step(const DiffusionModel& model, std::span<double> x, std::span<const double> z,
                double dt, StepWorkspace& ws);

// Zero-based index of the increment that drives antithetic step k: the fine
// increments with each consecutive pair swapped (Z_2, Z_1, Z_4, Z_3, ...).
constexpr std::size_t antithetic_increment(std::size_t k) noexcept {
    return (k % 2 == 0) ? k + 1 : k - 1;
}

// In-place unit-time advances. Throw PropagationError on a non-finite state.
void advance_milstein(const DiffusionModel& model, Level level, std::span<double> x,
                      const GaussianDriver& driver, StepWorkspace& ws);
void advance_euler(const DiffusionModel& model, Level level, std::span<double> x,
                   const GaussianDriver& driver, StepWorkspace& ws);
void advance_antithetic(const DiffusionModel& model, Level level, std::span<double> fine,
                        std::span<double> coarse, std::span<double> anti,
                        const GaussianDriver& driver, StepWorkspace& ws);
void advance_euler_pair(const DiffusionModel& model, Level level, std::span<double> fine,
                        std::span<double> coarse, const GaussianDriver& driver, StepWorkspace& ws);

// Value-returning forms. The RandomStream overloads draw exactly 2^l
// d-vectors from the stream and nothing else.
Vector milstein_unit(const DiffusionModel& model, Level level, std::span<const double> x0,
                     const GaussianDriver& driver);
Vector milstein_unit(const DiffusionModel& model, Level level, std::span<const double> x0,
                     RandomStream& rng);

CoupledTriple antithetic_triple_unit(const DiffusionModel& model, Level level,
                                     const CoupledTriple& start, const GaussianDriver& driver);
CoupledTriple antithetic_triple_unit(const DiffusionModel& model, Level level,
                                     const CoupledTriple& start, RandomStream& rng);

Vector euler_unit(const DiffusionModel& model, Level level, std::span<const double> x0,
                  const GaussianDriver& driver);
Vector euler_unit(const DiffusionModel& model, Level level, std::span<const double> x0,
                  RandomStream& rng);

std::pair<Vector, Vector> euler_pair_unit(const DiffusionModel& model, Level level,
                                          const std::pair<Vector, Vector>& start,
                                          const GaussianDriver& driver);
std::pair<Vector, Vector> euler_pair_unit(const DiffusionModel& model, Level level,
                                          const std::pair<Vector, Vector>& start,
                                          RandomStream& rng);

}  // namespace amlpf
