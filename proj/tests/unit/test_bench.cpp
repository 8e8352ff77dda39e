#include <cmath>
#include <numbers>

#include "amlpf/bench.hpp"
#include "amlpf/errors.hpp"
#include "doctest.h"

using namespace amlpf;

namespace {

ObservationSequence single(double y) {
    ObservationSequence obs;
    obs.push_back(std::vector<double>{y});
    return obs;
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("simulated linear data has the right moments") {
    // x_k = x_{k-1} + N(0, 1), y_k = x_k + N(0, 1): increments of y have
    // variance 3 and lag-one covariance -1.
    const auto ssm = builtin_model("linear_gaussian");
    const std::size_t n = 40000;
    const auto data = simulate_data(ssm, n, {}, 12);
    REQUIRE(data.exact);
    REQUIRE(data.latent.size() == n);
    double v = 0.0, c = 0.0, prev = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        const double d = data.observations[k][0] - data.observations[k - 1][0];
        v += d * d;
        c += d * prev;
        prev = d;
    }
    v /= (n - 1);
    c /= (n - 2);
    CHECK(v == doctest::Approx(3.0).epsilon(0.05));
    CHECK(c == doctest::Approx(-1.0).epsilon(0.1));
}

TEST_CASE("gbm data from the exact transition") {
    // log X_1 ~ N(mu - sigma^2/2, sigma^2) from x0 = 1.
    const auto ssm = builtin_model("gbm");
    double m = 0.0, s = 0.0;
    const int R = 20000;
    for (int r = 0; r < R; ++r) {
        const auto d = simulate_data(ssm, 1, {}, static_cast<std::uint64_t>(r));
        const double l = std::log(d.latent[0][0]);
        m += l;
        s += l * l;
    }
    m /= R;
    s = s / R - m * m;
    CHECK(std::abs(m - (0.02 - 0.02)) < 4.0 * 0.2 / std::sqrt(double(R)));
    CHECK(s == doctest::Approx(0.04).epsilon(0.05));

    const auto cc = simulate_data(builtin_model("clark_cameron"), 3, {true, 6}, 1);
    CHECK_FALSE(cc.exact);
    CHECK(cc.level == 6);
    CHECK(has_exact_transition(ssm));
    CHECK_FALSE(has_exact_transition(builtin_model("nlm")));
}

TEST_CASE("kalman by hand") {
    // x0 = 0, unit variances, y_1 = 1: posterior N(1/2, 1/2), evidence N(1; 0, 2).
    const auto ssm = builtin_model("linear_gaussian");
    const auto phis = test_functions({"x1", "x1_sq"});
    const auto ref = kalman_reference(ssm, single(1.0), phis);
    CHECK(ref.provenance == Provenance::kalman_exact);
    CHECK(ref.mean[0] == doctest::Approx(0.5));
    CHECK(ref.variance[0] == doctest::Approx(0.5));
    CHECK(ref.estimates[0][0] == doctest::Approx(0.5));
    CHECK(ref.estimates[0][1] == doctest::Approx(0.75));
    CHECK(ref.log_nc[0] == doctest::Approx(-0.5 * std::log(4.0 * std::numbers::pi) - 0.25));
}

TEST_CASE("kalman with an uninformative observation is the prior") {
    ModelSpec spec;
    spec.name = "linear_gaussian";
    spec.params = {{"theta", 0.4}, {"tau", 1e6}};
    const auto ssm = builtin_model(spec);
    ObservationSequence obs = single(3.0);
    obs.push_back(std::vector<double>{-2.0});
    const auto ref = kalman_reference(ssm, obs, test_functions({"x1"}));
    CHECK(ref.mean[1] == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(ref.variance[1] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("kalman needs a linear model") {
    const auto phis = test_functions({"x1"});
    CHECK_THROWS_AS(kalman_reference(builtin_model("nlm"), single(0.0), phis), UsageError);
    CHECK_THROWS_AS(kalman_reference(builtin_model("gbm"), single(0.0), test_functions({"x2"})),
                    UsageError);
}

TEST_CASE("ground truth provenance") {
    const auto phis = test_functions({"x1"});
    GroundTruthOptions opts;
    opts.level = 3;
    opts.particles = 200;
    opts.runs = 4;
    opts.seed = 3;
    const auto lin = ground_truth(builtin_model("linear_gaussian"), single(0.2), phis, opts);
    CHECK(lin.provenance == Provenance::kalman_exact);

    const auto nlm = builtin_model("nlm");
    const auto data = simulate_data(nlm, 3, {}, 2);
    const auto pf = ground_truth(nlm, data.observations, phis, opts);
    CHECK(pf.provenance == Provenance::high_resolution_pf);
    CHECK(pf.standard_error > 0.0);
    CHECK(pf.nc_se.back() > 0.0);

    opts.method = Method::amlpf;
    opts.min_level = 1;
    opts.epsilon = 0.1;
    const auto ml = ground_truth(nlm, data.observations, phis, opts);
    CHECK(ml.provenance == Provenance::high_resolution_amlpf);
    CHECK(std::abs(ml.estimates[2][0] - pf.estimates[2][0]) <
          6.0 * std::hypot(ml.estimate_se[2][0], pf.estimate_se[2][0]));
    CHECK(to_string(ml.provenance) == "high_resolution_amlpf");

    opts.runs = 1;
    CHECK_THROWS_AS(ground_truth(nlm, data.observations, phis, opts), UsageError);
}

TEST_CASE("clark_cameron reference integrates out x2") {
    const auto cc = builtin_model("clark_cameron");
    const auto data = simulate_data(cc, 2, {}, 4);
    const auto phis = test_functions({"x1", "x2", "x2_sq"});
    CHECK(has_conditional_reference(cc, phis));
    CHECK_FALSE(has_conditional_reference(cc, test_functions({"x3"})));
    CHECK_FALSE(has_conditional_reference(builtin_model("nlm"), phis));

    GroundTruthOptions opts;
    opts.level = 5;
    opts.particles = 4000;
    opts.runs = 10;
    opts.seed = 6;
    const auto rb = ground_truth(cc, data.observations, phis, opts);
    CHECK(rb.provenance == Provenance::rao_blackwellized);
    CHECK(to_string(rb.provenance) == "rao_blackwellized");

    std::vector<double> x1, x2, log_nc;
    for (std::uint64_t r = 0; r < 10; ++r) {
        const auto run = pf_run(cc, data.observations, Level(5), 4000, {}, phis, derive_seed(9, {r}));
        x1.push_back(run.estimates[1][0]);
        x2.push_back(run.estimates[1][1]);
        log_nc.push_back(run.log_nc[1]);
    }
    auto mean_se = [](const std::vector<double>& v) {
        double m = 0.0, ss = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        for (double x : v) ss += (x - m) * (x - m);
        return std::pair{m, std::sqrt(ss / static_cast<double>(v.size() * (v.size() - 1)))};
    };
    // The Milstein filter carries an O(Delta) bias; allow 0.02 on top of 5 SE.
    const auto [m1, s1] = mean_se(x1);
    CHECK(std::abs(rb.estimates[1][0] - m1) < 5.0 * std::hypot(s1, rb.estimate_se[1][0]) + 0.02);
    const auto [m2, s2] = mean_se(x2);
    CHECK(std::abs(rb.estimates[1][1] - m2) < 5.0 * std::hypot(s2, rb.estimate_se[1][1]) + 0.02);
    const auto [mn, sn] = mean_se(log_nc);
    CHECK(std::abs(rb.log_nc[1] - mn) < 5.0 * sn + 0.02);
    CHECK(rb.estimates[1][2] > rb.estimates[1][1] * rb.estimates[1][1]);
}

TEST_CASE("sweep on a small problem") {
    const auto ssm = builtin_model("gbm");
    const auto data = simulate_data(ssm, 3, {}, 5);
    const auto phis = test_functions({"x1"});
    const auto ref = kalman_reference(ssm, data.observations, phis);
    SweepSpec spec;
    spec.methods = {Method::pf, Method::mlpf, Method::amlpf};
    for (int L = 3; L <= 7; ++L) spec.budgets.push_back({0.8 * std::ldexp(1.0, -L), L, 0});
    spec.min_level = 2;
    spec.repeats = 2;
    spec.master_seed = 8;
    const auto records = mse_cost_sweep(ssm, data.observations, ref, spec);
    REQUIRE(records.size() == 3 * 5 * 2);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        CHECK(r.low_precision);
        CHECK(r.model == "gbm");
        CHECK(r.mse == doctest::Approx(r.variance + r.bias_sq).epsilon(1e-9));
        if (r.budget_index > 0) CHECK(r.cost > records[i - 1].cost);
    }
    CHECK(records.front().method == Method::pf);
    CHECK(records.front().cost == double(pf_cost(3, pf_particles_for(spec.budgets[0], 1.0), Level(3))));

    spec.threads = 3;
    const auto again = mse_cost_sweep(ssm, data.observations, ref, spec);
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(again[i].mse == records[i].mse);
        CHECK(again[i].cost == records[i].cost);
    }

    spec.repeats = 1;
    CHECK_THROWS_AS(mse_cost_sweep(ssm, data.observations, ref, spec), UsageError);
}

TEST_CASE("imprecise simulated reference is rejected") {
    const auto ssm = builtin_model("nlm");
    const auto data = simulate_data(ssm, 2, {}, 5);
    const auto phis = test_functions({"x1"});
    GroundTruthOptions opts;
    opts.level = 3;
    opts.particles = 20;
    opts.runs = 3;
    const auto ref = ground_truth(ssm, data.observations, phis, opts);
    SweepSpec spec;
    spec.methods = {Method::pf};
    spec.budgets = {{0.02, 4, 0}};
    spec.repeats = 3;
    try {
        mse_cost_sweep(ssm, data.observations, ref, spec);
        FAIL("expected a precision error");
    } catch (const ReferencePrecisionError& e) {
        CHECK(e.code() == "bench.reference_precision");
    }
}

TEST_CASE("rate fit") {
    const std::vector<double> mse{1e-2, 1e-3, 1e-4, 1e-5};
    std::vector<double> cost;
    for (double m : mse) cost.push_back(3.0 / m);
    const auto fit = fit_rate(cost, mse);
    CHECK(fit.slope == doctest::Approx(-1.0));
    CHECK(fit.intercept == doctest::Approx(std::log10(3.0)));
    CHECK(fit.standard_error == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(fit.points == 4);
    const std::vector<double> two{1.0, 2.0};
    CHECK_THROWS_AS(fit_rate(two, two), UsageError);
    const std::vector<double> zero{0.0, 1.0, 2.0};
    CHECK_THROWS_AS(fit_rate(zero, zero), UsageError);
    CHECK(pf_particles_for({0.1, 3, 0}, 2.0) == 200);
    CHECK(pf_particles_for({0.1, 3, 7}, 2.0) == 7);
}

}  // TEST_SUITE
