#include <cmath>
#include <limits>
#include <numeric>

#include "amlpf/errors.hpp"
#include "amlpf/model.hpp"
#include "amlpf/scheme.hpp"
#include "doctest.h"

using namespace amlpf;

namespace {

// Driver for level l-1 built from consecutive pair sums of a level-l driver.
GaussianDriver pair_sums(const GaussianDriver& fine) {
    const std::size_t d = fine.dim();
    std::vector<double> v(fine.values().size() / 2);
    for (std::size_t k = 0; k < fine.size() / 2; ++k)
        for (std::size_t j = 0; j < d; ++j)
            v[k * d + j] = fine.increment(2 * k)[j] + fine.increment(2 * k + 1)[j];
    return GaussianDriver(fine.level().coarser(), d, std::move(v));
}

GaussianDriver swapped(const GaussianDriver& fine) {
    const std::size_t d = fine.dim();
    std::vector<double> v(fine.values().size());
    for (std::size_t k = 0; k < fine.size(); ++k)
        for (std::size_t j = 0; j < d; ++j) v[k * d + j] = fine.increment(antithetic_increment(k))[j];
    return GaussianDriver(fine.level(), d, std::move(v));
}

class Exploding final : public DiffusionModel {
public:
    Exploding() : DiffusionModel(1) {}
    void drift(std::span<const double> x, std::span<double> out) const override {
        out[0] = x[0] * x[0] * 1e200;
    }
    void diffusion(std::span<const double>, std::span<double> out) const override { out[0] = 1.0; }
};

}  // namespace

TEST_SUITE("scheme") {

TEST_CASE("levels") {
    CHECK(Level(0).delta() == 1.0);
    CHECK(Level(5).steps() == 32);
    CHECK(Level(5).delta() == 1.0 / 32.0);
    CHECK(Level(4).coarser() == Level(3));
    CHECK_THROWS_AS(Level(-1), ContractViolation);
    CHECK_THROWS_AS(Level(63), ContractViolation);
    CHECK_THROWS_AS(Level(0).coarser(), ContractViolation);
}

TEST_CASE("antithetic increments swap consecutive pairs") {
    CHECK(antithetic_increment(0) == 1);
    CHECK(antithetic_increment(1) == 0);
    CHECK(antithetic_increment(2) == 3);
    CHECK(antithetic_increment(7) == 6);
    for (std::size_t k = 0; k < 64; ++k) CHECK(antithetic_increment(antithetic_increment(k)) == k);
}

TEST_CASE("single steps by hand") {
    const GbmDiffusion gbm(0.02, 0.2);
    StepWorkspace ws(1);
    // 2 + 0.02*2*0.16 + 0.2*2*0.2 + 0.04*(0.04 - 0.16)
    Vector x{2.0};
    milstein_step(gbm, x, Vector{0.2}, 0.16, ws);
    CHECK(x[0] == doctest::Approx(2.0816));
    x = {2.0};
    euler_step(gbm, x, Vector{0.2}, 0.16, ws);
    CHECK(x[0] == doctest::Approx(2.0864));
}

TEST_CASE("coupled paths are the single-path schemes on derived drivers") {
    const NonlinearDiffusion nlm({1.0, 1.0, 0.0, 0.0, 1.0, 1.0});
    RandomStream rng(17);
    const Level level(4);
    const auto driver = GaussianDriver::draw(level, 2, rng);
    const Vector x0{0.3, -0.2};
    const auto t = antithetic_triple_unit(nlm, level, {x0, x0, x0}, driver);
    const auto fine = milstein_unit(nlm, level, x0, driver);
    const auto coarse = milstein_unit(nlm, level.coarser(), x0, pair_sums(driver));
    const auto anti = milstein_unit(nlm, level, x0, swapped(driver));
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(t.fine[i] == doctest::Approx(fine[i]).epsilon(1e-14));
        CHECK(t.coarse[i] == doctest::Approx(coarse[i]).epsilon(1e-14));
        CHECK(t.anti[i] == doctest::Approx(anti[i]).epsilon(1e-14));
    }
    const auto [ef, ec] = euler_pair_unit(nlm, level, {x0, x0}, driver);
    const auto ef2 = euler_unit(nlm, level, x0, driver);
    const auto ec2 = euler_unit(nlm, level.coarser(), x0, pair_sums(driver));
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(ef[i] == doctest::Approx(ef2[i]).epsilon(1e-14));
        CHECK(ec[i] == doctest::Approx(ec2[i]).epsilon(1e-14));
    }
}

TEST_CASE("clark-cameron antithetic average equals the coarse path") {
    // x2 gains x1 z2 + z1 z2 / 2 per step; averaging the swapped pair of fine
    // steps reproduces the coarse step exactly.
    const ClarkCameronDiffusion cc;
    RandomStream rng(5);
    const Vector x0{0.4, 0.1};
    const auto t = antithetic_triple_unit(cc, Level(3), {x0, x0, x0}, rng);
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(0.5 * (t.fine[i] + t.anti[i]) == doctest::Approx(t.coarse[i]).epsilon(1e-12));
    CHECK(std::abs(t.fine[1] - t.coarse[1]) > 1e-6);
}

TEST_CASE("constant coefficients make all paths identical") {
    const LinearGaussianDiffusion lg(0.3, 1.7);
    RandomStream rng(3);
    const Vector x0{0.5};
    const auto t = antithetic_triple_unit(lg, Level(6), {x0, x0, x0}, rng);
    CHECK(t.fine == t.coarse);
    CHECK(t.fine == t.anti);
    RandomStream rng2(3);
    const auto [f, c] = euler_pair_unit(lg, Level(6), {x0, x0}, rng2);
    CHECK(f == c);
    CHECK(f == t.fine);
}

TEST_CASE("stream overloads consume exactly 2^l d-vectors") {
    const ClarkCameronDiffusion cc;
    RandomStream a(99), b(99);
    const Vector x0{0.0, 0.0};
    milstein_unit(cc, Level(3), x0, a);
    for (int i = 0; i < 8 * 2; ++i) b.gaussian();
    CHECK(a.gaussian() == b.gaussian());
}

TEST_CASE("milstein has strong order one on gbm") {
    // Exact solution on the same Brownian path: x0 exp((mu - s^2/2) + s W_1).
    const double mu = 0.05, s = 0.4;
    const GbmDiffusion gbm(mu, s);
    std::vector<double> logs;
    for (int l = 2; l <= 6; ++l) {
        double err = 0.0;
        const int R = 4000;
        for (int r = 0; r < R; ++r) {
            RandomStream rng(derive_seed(1, {static_cast<std::uint64_t>(l), static_cast<std::uint64_t>(r)}));
            const auto drv = GaussianDriver::draw(Level(l), 1, rng);
            const double w = std::accumulate(drv.values().begin(), drv.values().end(), 0.0);
            const double exact = std::exp(mu - 0.5 * s * s + s * w);
            const double approx = milstein_unit(gbm, Level(l), Vector{1.0}, drv)[0];
            err += (approx - exact) * (approx - exact);
        }
        logs.push_back(std::log2(err / R));
    }
    const double slope = (logs.back() - logs.front()) / 4.0;
    CHECK(slope == doctest::Approx(-2.0).epsilon(0.15));
}

TEST_CASE("non-finite states raise") {
    const Exploding boom;
    RandomStream rng(1);
    try {
        milstein_unit(boom, Level(3), Vector{1e60}, rng);
        FAIL("expected a propagation error");
    } catch (const PropagationError& e) {
        CHECK(e.code() == "scheme.nonfinite");
        CHECK(e.step() < 8);
    }
}

TEST_CASE("coupled steps need level one or finer") {
    const GbmDiffusion gbm(0.0, 0.1);
    RandomStream rng(1);
    const Vector x{1.0};
    CHECK_THROWS_AS(antithetic_triple_unit(gbm, Level(0), {x, x, x}, rng), ContractViolation);
    CHECK_THROWS_AS(euler_pair_unit(gbm, Level(0), {x, x}, rng), ContractViolation);
}

}  // TEST_SUITE
