#include "amlpf/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "amlpf/errors.hpp"

namespace amlpf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double gaussian_logpdf(double y, double mean, double var) {
    const double r = y - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * var) + r * r / var);
}

double coordinate_mean(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

void require_positive(const std::string& what, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw UsageError("model", what + " must be positive and finite");
    }
}

}  // namespace

DiffusionModel::DiffusionModel(std::size_t dim, Compensator compensator)
    : dim_(dim), compensator_(compensator) {
    if (dim == 0) throw ContractViolation("model", "diffusion dimension must be positive");
}

void DiffusionModel::diffusion_jacobian(std::span<const double> x, std::span<double> out) const {
    const std::size_t d = dim_;
    Vector xp(x.begin(), x.end());
    Vector plus(d * d), minus(d * d);
    for (std::size_t m = 0; m < d; ++m) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[m]));
        xp[m] = x[m] + h;
        diffusion(xp, plus);
        xp[m] = x[m] - h;
        diffusion(xp, minus);
        xp[m] = x[m];
        for (std::size_t ij = 0; ij < d * d; ++ij) {
            out[ij * d + m] = (plus[ij] - minus[ij]) / (2.0 * h);
        }
    }
}

Vector DiffusionModel::drift(std::span<const double> x) const {
    if (x.size() != dim_) throw ContractViolation("model", "state has wrong dimension");
    Vector out(dim_);
    drift(x, std::span<double>(out));
    return out;
}

Vector DiffusionModel::diffusion(std::span<const double> x) const {
    if (x.size() != dim_) throw ContractViolation("model", "state has wrong dimension");
    Vector out(dim_ * dim_);
    diffusion(x, std::span<double>(out));
    return out;
}

Vector DiffusionModel::diffusion_jacobian(std::span<const double> x) const {
    if (x.size() != dim_) throw ContractViolation("model", "state has wrong dimension");
    Vector out(dim_ * dim_ * dim_);
    diffusion_jacobian(x, std::span<double>(out));
    return out;
}

MilsteinTensor milstein_tensor(const DiffusionModel& model, std::span<const double> x) {
    const std::size_t d = model.dim();
    if (x.size() != d) throw ContractViolation("model", "milstein_tensor: state has wrong dimension");
    const Vector beta = model.diffusion(x);
    const Vector jac = model.diffusion_jacobian(x);
    MilsteinTensor h{d, std::vector<double>(d * d * d, 0.0)};
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t k = 0; k < d; ++k) {
                double s = 0.0;
                for (std::size_t m = 0; m < d; ++m) {
                    s += beta[m * d + k] * jac[(i * d + j) * d + m];
                }
                h.data[(i * d + j) * d + k] = 0.5 * s;
            }
        }
    }
    return h;
}

Vector h_correction(const DiffusionModel& model, std::span<const double> x,
                    std::span<const double> z, double delta) {
    const std::size_t d = model.dim();
    if (!(delta > 0.0)) throw ContractViolation("model", "h_correction: step size must be positive");
    if (x.size() != d || z.size() != d) {
        throw ContractViolation("model", "h_correction: dimension mismatch");
    }
    const MilsteinTensor h = milstein_tensor(model, x);
    const bool all_pairs = model.compensator() == Compensator::all_pairs;
    Vector out(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t k = 0; k < d; ++k) {
                const double comp = (all_pairs || j == k) ? delta : 0.0;
                out[i] += h(i, j, k) * (z[j] * z[k] - comp);
            }
        }
    }
    return out;
}

// --- GBM --------------------------------------------------------------------

GbmDiffusion::GbmDiffusion(double mu, double sigma, Compensator c)
    : DiffusionModel(1, c), mu_(mu), sigma_(sigma) {}

void GbmDiffusion::drift(std::span<const double> x, std::span<double> out) const {
    out[0] = mu_ * x[0];
}

void GbmDiffusion::diffusion(std::span<const double> x, std::span<double> out) const {
    out[0] = sigma_ * x[0];
}

void GbmDiffusion::diffusion_jacobian(std::span<const double>, std::span<double> out) const {
    out[0] = sigma_;
}

// --- Clark-Cameron ----------------------------------------------------------

ClarkCameronDiffusion::ClarkCameronDiffusion(Compensator c) : DiffusionModel(2, c) {}

void ClarkCameronDiffusion::drift(std::span<const double>, std::span<double> out) const {
    out[0] = 0.0;
    out[1] = 0.0;
}

void ClarkCameronDiffusion::diffusion(std::span<const double> x, std::span<double> out) const {
    out[0] = 1.0;
    out[1] = 0.0;
    out[2] = 0.0;
    out[3] = x[0];
}

void ClarkCameronDiffusion::diffusion_jacobian(std::span<const double>,
                                               std::span<double> out) const {
    std::fill(out.begin(), out.begin() + 8, 0.0);
    // d beta_22 / d x_1
    out[(1 * 2 + 1) * 2 + 0] = 1.0;
}

// --- nonlinear diffusion ----------------------------------------------------

NonlinearDiffusion::NonlinearDiffusion(Params p, Compensator c) : DiffusionModel(2, c), p_(p) {}

void NonlinearDiffusion::drift(std::span<const double> x, std::span<double> out) const {
    out[0] = p_.theta1 * (p_.mu1 - x[0]);
    out[1] = p_.theta2 * (p_.mu2 - x[0]);
}

void NonlinearDiffusion::diffusion(std::span<const double> x, std::span<double> out) const {
    const double scale = 1.0 / std::sqrt(1.0 + x[0] * x[0]);
    out[0] = p_.sigma1 * scale;
    out[1] = 0.0;
    out[2] = 0.0;
    out[3] = p_.sigma2 * scale;
}

void NonlinearDiffusion::diffusion_jacobian(std::span<const double> x,
                                            std::span<double> out) const {
    std::fill(out.begin(), out.begin() + 8, 0.0);
    const double u = 1.0 + x[0] * x[0];
    const double dscale = -x[0] / (u * std::sqrt(u));
    out[(0 * 2 + 0) * 2 + 0] = p_.sigma1 * dscale;
    out[(1 * 2 + 1) * 2 + 0] = p_.sigma2 * dscale;
}

// --- linear Gaussian --------------------------------------------------------

LinearGaussianDiffusion::LinearGaussianDiffusion(double theta, double sigma, Compensator c)
    : DiffusionModel(1, c), theta_(theta), sigma_(sigma) {}

void LinearGaussianDiffusion::drift(std::span<const double>, std::span<double> out) const {
    out[0] = theta_;
}

void LinearGaussianDiffusion::diffusion(std::span<const double>, std::span<double> out) const {
    out[0] = sigma_;
}

void LinearGaussianDiffusion::diffusion_jacobian(std::span<const double>,
                                                 std::span<double> out) const {
    out[0] = 0.0;
}

// --- observations -----------------------------------------------------------

LogNormalObservation::LogNormalObservation(double tau2) : ObservationModel(1), tau2_(tau2) {
    require_positive("tau2", tau2);
}

double LogNormalObservation::log_density(std::span<const double> x,
                                         std::span<const double> y) const {
    if (!(x[0] > 0.0)) return kNegInf;
    return gaussian_logpdf(y[0], std::log(x[0]), tau2_);
}

void LogNormalObservation::sample(std::span<const double> x, RandomStream& rng,
                                  std::span<double> y) const {
    if (!(x[0] > 0.0)) throw ContractViolation("model", "log-normal observation needs x > 0");
    y[0] = std::log(x[0]) + std::sqrt(tau2_) * rng.gaussian();
}

MeanGaussianObservation::MeanGaussianObservation(double tau2) : ObservationModel(1), tau2_(tau2) {
    require_positive("tau2", tau2);
}

double MeanGaussianObservation::log_density(std::span<const double> x,
                                            std::span<const double> y) const {
    return gaussian_logpdf(y[0], coordinate_mean(x), tau2_);
}

void MeanGaussianObservation::sample(std::span<const double> x, RandomStream& rng,
                                     std::span<double> y) const {
    y[0] = coordinate_mean(x) + std::sqrt(tau2_) * rng.gaussian();
}

MeanLaplaceObservation::MeanLaplaceObservation(double scale) : ObservationModel(1), scale_(scale) {
    require_positive("s", scale);
}

double MeanLaplaceObservation::log_density(std::span<const double> x,
                                           std::span<const double> y) const {
    return -std::log(2.0 * scale_) - std::abs(y[0] - coordinate_mean(x)) / scale_;
}

void MeanLaplaceObservation::sample(std::span<const double> x, RandomStream& rng,
                                    std::span<double> y) const {
    // Inverse CDF on u in (-1/2, 1/2).
    double u = rng.uniform() - 0.5;
    while (u == -0.5) u = rng.uniform() - 0.5;
    const double mag = -scale_ * std::log(1.0 - 2.0 * std::abs(u));
    y[0] = coordinate_mean(x) + (u < 0.0 ? -mag : mag);
}

ConstantObservation::ConstantObservation(double log_c, std::size_t obs_dim)
    : ObservationModel(obs_dim), log_c_(log_c) {}

double ConstantObservation::log_density(std::span<const double>, std::span<const double>) const {
    return log_c_;
}

void ConstantObservation::sample(std::span<const double>, RandomStream&,
                                 std::span<double> y) const {
    std::fill(y.begin(), y.end(), 0.0);
}

double obs_logdensity(const ObservationModel& model, std::span<const double> x,
                      std::span<const double> y) {
    if (y.size() != model.obs_dim()) {
        throw ContractViolation("model", "observation has wrong dimension");
    }
    return model.log_density(x, y);
}

// --- registry ---------------------------------------------------------------

std::map<std::string, double> builtin_defaults(const std::string& name) {
    if (name == "gbm") return {{"mu", 0.02}, {"sigma", 0.2}, {"tau2", 0.02}};
    if (name == "clark_cameron") return {{"tau2", 0.1}};
    if (name == "nlm") {
        return {{"theta1", 1.0}, {"theta2", 1.0}, {"mu1", 0.0}, {"mu2", 0.0},
                {"sigma1", 1.0}, {"sigma2", 1.0}, {"s", std::sqrt(0.1)}};
    }
    if (name == "linear_gaussian") return {{"theta", 0.0}, {"sigma", 1.0}, {"tau", 1.0}};
    throw UsageError("model", "unknown model '" + name +
                                  "' (expected gbm, clark_cameron, nlm or linear_gaussian)");
}

StateSpaceModel builtin_model(const ModelSpec& spec) {
    auto params = builtin_defaults(spec.name);
    for (const auto& [key, value] : spec.params) {
        if (!params.contains(key)) {
            throw UsageError("model", "unknown parameter '" + key + "' for model " + spec.name);
        }
        if (!std::isfinite(value)) throw UsageError("model", "parameter " + key + " is not finite");
        params[key] = value;
    }
    const Compensator c = spec.compensator;

    StateSpaceModel m;
    m.name = spec.name;
    if (spec.name == "gbm") {
        m.diffusion = std::make_shared<GbmDiffusion>(params["mu"], params["sigma"], c);
        m.observation = std::make_shared<LogNormalObservation>(params["tau2"]);
        m.x0 = {1.0};
    } else if (spec.name == "clark_cameron") {
        m.diffusion = std::make_shared<ClarkCameronDiffusion>(c);
        m.observation = std::make_shared<MeanGaussianObservation>(params["tau2"]);
        m.x0 = {0.0, 0.0};
    } else if (spec.name == "nlm") {
        NonlinearDiffusion::Params p{params["theta1"], params["theta2"], params["mu1"],
                                     params["mu2"],    params["sigma1"], params["sigma2"]};
        m.diffusion = std::make_shared<NonlinearDiffusion>(p, c);
        m.observation = std::make_shared<MeanLaplaceObservation>(params["s"]);
        m.x0 = {0.0, 0.0};
    } else {
        m.diffusion = std::make_shared<LinearGaussianDiffusion>(params["theta"], params["sigma"], c);
        const double tau = params["tau"];
        require_positive("tau", tau);
        m.observation = std::make_shared<MeanGaussianObservation>(tau * tau);
        m.x0 = {0.0};
    }
    if (spec.x0) m.x0 = *spec.x0;
    m.params = std::move(params);
    m.validate();
    return m;
}

StateSpaceModel builtin_model(const std::string& name) {
    ModelSpec spec;
    spec.name = name;
    return builtin_model(spec);
}

void StateSpaceModel::validate() const {
    if (!diffusion || !observation) throw ContractViolation("model", "incomplete state-space model");
    if (x0.size() != diffusion->dim()) {
        throw UsageError("model", "x0 has length " + std::to_string(x0.size()) + ", expected " +
                                      std::to_string(diffusion->dim()));
    }
    for (double v : x0) {
        if (!std::isfinite(v)) throw UsageError("model", "x0 must be finite");
    }
}

std::string to_string(Compensator c) {
    return c == Compensator::diagonal ? "diagonal" : "all_pairs";
}

Compensator compensator_from_string(const std::string& s) {
    if (s == "diagonal") return Compensator::diagonal;
    if (s == "all_pairs") return Compensator::all_pairs;
    throw UsageError("model", "unknown compensator '" + s + "' (expected diagonal or all_pairs)");
}

}  // namespace amlpf
