#include "amlpf/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "amlpf/errors.hpp"

namespace amlpf {

namespace {

void check_finite(std::span<const double> x, std::size_t step, const char* path) {
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw PropagationError(step, std::string("non-finite state on the ") + path + " path");
        }
    }
}

void check_driver(const DiffusionModel& model, Level level, const GaussianDriver& driver) {
    if (driver.dim() != model.dim() || !(driver.level() == level)) {
        throw ContractViolation("scheme", "driver does not match model dimension and level");
    }
}

// Sums the increments in index order into ws.zsum.
void total_increment(const GaussianDriver& driver, StepWorkspace& ws) {
    std::fill(ws.zsum.begin(), ws.zsum.end(), 0.0);
    for (std::size_t k = 0; k < driver.size(); ++k) {
        const auto z = driver.increment(k);
        for (std::size_t i = 0; i < ws.zsum.size(); ++i) ws.zsum[i] += z[i];
    }
}

// Exact unit-time solution under constant coefficients, driven by ws.zsum.
void apply_constant(const DiffusionModel& model, std::span<double> x, StepWorkspace& ws,
                    const char* path) {
    const std::size_t d = model.dim();
    model.drift(x, ws.drift);
    model.diffusion(x, ws.beta);
    for (std::size_t i = 0; i < d; ++i) {
        double bw = 0.0;
        for (std::size_t j = 0; j < d; ++j) bw += ws.beta[i * d + j] * ws.zsum[j];
        x[i] += ws.drift[i] + bw;
    }
    check_finite(x, 0, path);
}

void check_state(const DiffusionModel& model, std::span<const double> x) {
    if (x.size() != model.dim()) throw ContractViolation("scheme", "state has wrong dimension");
}

}  // namespace

Level::Level(int l) : l_(l) {
    if (l < 0 || l > kMaxIndex) {
        throw ContractViolation("scheme", "level must lie in [0, 62], got " + std::to_string(l));
    }
}

Level Level::coarser() const {
    if (l_ == 0) throw ContractViolation("scheme", "level 0 has no coarser level");
    return Level(l_ - 1);
}

GaussianDriver::GaussianDriver(Level level, std::size_t dim)
    : level_(level), dim_(dim), values_(static_cast<std::size_t>(level.steps()) * dim, 0.0) {}

GaussianDriver::GaussianDriver(Level level, std::size_t dim, std::vector<double> increments)
    : level_(level), dim_(dim), values_(std::move(increments)) {
    if (values_.size() != static_cast<std::size_t>(level.steps()) * dim) {
        throw ContractViolation("scheme", "driver needs 2^l * d increments");
    }
}

GaussianDriver GaussianDriver::draw(Level level, std::size_t dim, RandomStream& rng) {
    GaussianDriver d(level, dim);
    d.redraw(rng);
    return d;
}

void GaussianDriver::redraw(RandomStream& rng) {
    const double sd = std::sqrt(level_.delta());
    for (double& v : values_) v = sd * rng.gaussian();
}

StepWorkspace::StepWorkspace(std::size_t d)
    : drift(d), beta(d * d), jac(d * d * d), bz(d), zsum(d) {}

void euler_step(const DiffusionModel& model, std::span<double> x, std::span<const double> z,
                double dt, StepWorkspace& ws) {
    const std::size_t d = ws.dim();
    model.drift(x, ws.drift);
    model.diffusion(x, ws.beta);
    for (std::size_t i = 0; i < d; ++i) {
        double bz = 0.0;
        for (std::size_t j = 0; j < d; ++j) bz += ws.beta[i * d + j] * z[j];
        ws.bz[i] = bz;
    }
    for (std::size_t i = 0; i < d; ++i) x[i] += ws.drift[i] * dt + ws.bz[i];
}

void milstein_step(const DiffusionModel& model, std::span<double> x, std::span<const double> z,
                   double dt, StepWorkspace& ws) {
    if (model.constant_diffusion()) {
        euler_step(model, x, z, dt, ws);
        return;
    }
    const std::size_t d = ws.dim();
    model.drift(x, ws.drift);
    model.diffusion(x, ws.beta);
    model.diffusion_jacobian(x, ws.jac);
    for (std::size_t i = 0; i < d; ++i) {
        double bz = 0.0;
        for (std::size_t j = 0; j < d; ++j) bz += ws.beta[i * d + j] * z[j];
        ws.bz[i] = bz;
    }
    const bool all_pairs = model.compensator() == Compensator::all_pairs;
    // H_i = 1/2 sum_{j,m} J_ijm (z_j (beta z)_m - dt * sum_k beta_mk c_jk)
    for (std::size_t i = 0; i < d; ++i) {
        double h = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t m = 0; m < d; ++m) {
                const double jac = ws.jac[(i * d + j) * d + m];
                if (jac == 0.0) continue;
                double comp = 0.0;
                if (all_pairs) {
                    for (std::size_t k = 0; k < d; ++k) comp += ws.beta[m * d + k];
                } else {
                    comp = ws.beta[m * d + j];
                }
                h += jac * (z[j] * ws.bz[m] - dt * comp);
            }
        }
        x[i] += ws.drift[i] * dt + ws.bz[i] + 0.5 * h;
    }
}

void advance_milstein(const DiffusionModel& model, Level level, std::span<double> x,
                      const GaussianDriver& driver, StepWorkspace& ws) {
    check_driver(model, level, driver);
    if (model.constant_coefficients()) {
        total_increment(driver, ws);
        apply_constant(model, x, ws, "fine");
        return;
    }
    const double dt = level.delta();
    const std::size_t n = driver.size();
    for (std::size_t k = 0; k < n; ++k) {
        milstein_step(model, x, driver.increment(k), dt, ws);
        check_finite(x, k, "fine");
    }
}

void advance_euler(const DiffusionModel& model, Level level, std::span<double> x,
                   const GaussianDriver& driver, StepWorkspace& ws) {
    check_driver(model, level, driver);
    if (model.constant_coefficients()) {
        total_increment(driver, ws);
        apply_constant(model, x, ws, "fine");
        return;
    }
    const double dt = level.delta();
    const std::size_t n = driver.size();
    for (std::size_t k = 0; k < n; ++k) {
        euler_step(model, x, driver.increment(k), dt, ws);
        check_finite(x, k, "fine");
    }
}

void advance_antithetic(const DiffusionModel& model, Level level, std::span<double> fine,
                        std::span<double> coarse, std::span<double> anti,
                        const GaussianDriver& driver, StepWorkspace& ws) {
    if (level.index() == 0) throw ContractViolation("scheme", "antithetic step needs level >= 1");
    check_driver(model, level, driver);
    if (model.constant_coefficients()) {
        total_increment(driver, ws);
        apply_constant(model, fine, ws, "fine");
        apply_constant(model, coarse, ws, "coarse");
        apply_constant(model, anti, ws, "antithetic");
        return;
    }
    const std::size_t d = model.dim();
    const double dt = level.delta();
    const std::size_t n = driver.size();
    for (std::size_t k = 0; k < n; ++k) {
        milstein_step(model, fine, driver.increment(k), dt, ws);
        milstein_step(model, anti, driver.increment(antithetic_increment(k)), dt, ws);
        check_finite(fine, k, "fine");
        check_finite(anti, k, "antithetic");
        if (k % 2 == 1) {
            const auto z1 = driver.increment(k - 1);
            const auto z2 = driver.increment(k);
            for (std::size_t i = 0; i < d; ++i) ws.zsum[i] = z1[i] + z2[i];
            milstein_step(model, coarse, ws.zsum, 2.0 * dt, ws);
            check_finite(coarse, k / 2, "coarse");
        }
    }
}

void advance_euler_pair(const DiffusionModel& model, Level level, std::span<double> fine,
                        std::span<double> coarse, const GaussianDriver& driver,
                        StepWorkspace& ws) {
    if (level.index() == 0) throw ContractViolation("scheme", "coupled step needs level >= 1");
    check_driver(model, level, driver);
    if (model.constant_coefficients()) {
        total_increment(driver, ws);
        apply_constant(model, fine, ws, "fine");
        apply_constant(model, coarse, ws, "coarse");
        return;
    }
    const std::size_t d = model.dim();
    const double dt = level.delta();
    const std::size_t n = driver.size();
    for (std::size_t k = 0; k < n; ++k) {
        euler_step(model, fine, driver.increment(k), dt, ws);
        check_finite(fine, k, "fine");
        if (k % 2 == 1) {
            const auto z1 = driver.increment(k - 1);
            const auto z2 = driver.increment(k);
            for (std::size_t i = 0; i < d; ++i) ws.zsum[i] = z1[i] + z2[i];
            euler_step(model, coarse, ws.zsum, 2.0 * dt, ws);
            check_finite(coarse, k / 2, "coarse");
        }
    }
}

Vector milstein_unit(const DiffusionModel& model, Level level, std::span<const double> x0,
                     const GaussianDriver& driver) {
    check_state(model, x0);
    Vector x(x0.begin(), x0.end());
    StepWorkspace ws(model.dim());
    advance_milstein(model, level, x, driver, ws);
    return x;
}

Vector milstein_unit(const DiffusionModel& model, Level level, std::span<const double> x0,
                     RandomStream& rng) {
    return milstein_unit(model, level, x0, GaussianDriver::draw(level, model.dim(), rng));
}

CoupledTriple antithetic_triple_unit(const DiffusionModel& model, Level level,
                                     const CoupledTriple& start, const GaussianDriver& driver) {
    check_state(model, start.fine);
    check_state(model, start.coarse);
    check_state(model, start.anti);
    CoupledTriple out = start;
    StepWorkspace ws(model.dim());
    advance_antithetic(model, level, out.fine, out.coarse, out.anti, driver, ws);
    return out;
}

CoupledTriple antithetic_triple_unit(const DiffusionModel& model, Level level,
                                     const CoupledTriple& start, RandomStream& rng) {
    if (level.index() == 0) throw ContractViolation("scheme", "antithetic step needs level >= 1");
    return antithetic_triple_unit(model, level, start,
                                  GaussianDriver::draw(level, model.dim(), rng));
}

Vector euler_unit(const DiffusionModel& model, Level level, std::span<const double> x0,
                  const GaussianDriver& driver) {
    check_state(model, x0);
    Vector x(x0.begin(), x0.end());
    StepWorkspace ws(model.dim());
    advance_euler(model, level, x, driver, ws);
    return x;
}

Vector euler_unit(const DiffusionModel& model, Level level, std::span<const double> x0,
                  RandomStream& rng) {
    return euler_unit(model, level, x0, GaussianDriver::draw(level, model.dim(), rng));
}

std::pair<Vector, Vector> euler_pair_unit(const DiffusionModel& model, Level level,
                                          const std::pair<Vector, Vector>& start,
                                          const GaussianDriver& driver) {
    check_state(model, start.first);
    check_state(model, start.second);
    auto out = start;
    StepWorkspace ws(model.dim());
    advance_euler_pair(model, level, out.first, out.second, driver, ws);
    return out;
}

std::pair<Vector, Vector> euler_pair_unit(const DiffusionModel& model, Level level,
                                          const std::pair<Vector, Vector>& start,
                                          RandomStream& rng) {
    if (level.index() == 0) throw ContractViolation("scheme", "coupled step needs level >= 1");
    return euler_pair_unit(model, level, start, GaussianDriver::draw(level, model.dim(), rng));
}

}  // namespace amlpf
