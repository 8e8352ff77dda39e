#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amlpf/random.hpp"

namespace amlpf {

using Vector = std::vector<double>;

// How the Milstein correction subtracts the Ito compensator: only on the
// diagonal (j == k), or from every (j, k) pair.
enum class Compensator { diagonal, all_pairs };

// dX = alpha(X) dt + beta(X) dW on R^d, with d-dimensional Brownian motion.
//
// Matrices are row-major: beta(i, j) lives at out[i * d + j]. The Jacobian
// d beta_ij / d x_m lives at out[(i * d + j) * d + m].
class DiffusionModel {
public:
    explicit DiffusionModel(std::size_t dim, Compensator compensator = Compensator::diagonal);
    virtual ~DiffusionModel() = default;

    std::size_t dim() const noexcept { return dim_; }
    Compensator compensator() const noexcept { return compensator_; }

    virtual void drift(std::span<const double> x, std::span<double> out) const = 0;
    virtual void diffusion(std::span<const double> x, std::span<double> out) const = 0;

    // Central differences with step 1e-6 * max(1, |x_m|) unless overridden.
    virtual void diffusion_jacobian(std::span<const double> x, std::span<double> out) const;

    // True when beta does not depend on x; lets the kernels skip the correction.
    virtual bool constant_diffusion() const noexcept { return false; }

    // True when both alpha and beta are constant. The kernels then integrate
    // a unit of time exactly as x + alpha + beta * (sum of increments), which
    // makes every level and every coupled path agree bit for bit.
    virtual bool constant_coefficients() const noexcept { return false; }

    Vector drift(std::span<const double> x) const;
    Vector diffusion(std::span<const double> x) const;
    Vector diffusion_jacobian(std::span<const double> x) const;

private:
    std::size_t dim_;
    Compensator compensator_;
};

class ObservationModel {
public:
    explicit ObservationModel(std::size_t obs_dim) : obs_dim_(obs_dim) {}
    virtual ~ObservationModel() = default;

    std::size_t obs_dim() const noexcept { return obs_dim_; }

    // log g(x, y). May return -infinity for states outside the support.
    virtual double log_density(std::span<const double> x, std::span<const double> y) const = 0;

    virtual void sample(std::span<const double> x, RandomStream& rng, std::span<double> y) const = 0;

private:
    std::size_t obs_dim_;
};

// Rank-3 array h[i][j][k], stored at data[(i * d + j) * d + k].
struct MilsteinTensor {
    std::size_t dim = 0;
    std::vector<double> data;

    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * dim + j) * dim + k];
    }
};

// h_ijk(x) = 1/2 sum_m beta_mk(x) d beta_ij(x) / d x_m
MilsteinTensor milstein_tensor(const DiffusionModel& model, std::span<const double> x);

// H_i(x, z) = sum_{j,k} h_ijk(x) (z_j z_k - delta * c_jk), where c_jk is the
// Kronecker delta under the diagonal compensator and 1 under all_pairs.
Vector h_correction(const DiffusionModel& model, std::span<const double> x,
                    std::span<const double> z, double delta);

// --- builtin diffusions -----------------------------------------------------

// dX = mu X dt + sigma X dW (d = 1).
class GbmDiffusion final : public DiffusionModel {
public:
    GbmDiffusion(double mu, double sigma, Compensator c = Compensator::diagonal);
    void drift(std::span<const double> x, std::span<double> out) const override;
    void diffusion(std::span<const double> x, std::span<double> out) const override;
    void diffusion_jacobian(std::span<const double> x, std::span<double> out) const override;
    using DiffusionModel::diffusion;
    using DiffusionModel::diffusion_jacobian;
    using DiffusionModel::drift;

    double mu() const noexcept { return mu_; }
    double sigma() const noexcept { return sigma_; }

private:
    double mu_;
    double sigma_;
};

// dX1 = dW1, dX2 = X1 dW2.
class ClarkCameronDiffusion final : public DiffusionModel {
public:
    explicit ClarkCameronDiffusion(Compensator c = Compensator::diagonal);
    void drift(std::span<const double> x, std::span<double> out) const override;
    void diffusion(std::span<const double> x, std::span<double> out) const override;
    void diffusion_jacobian(std::span<const double> x, std::span<double> out) const override;
    using DiffusionModel::diffusion;
    using DiffusionModel::diffusion_jacobian;
    using DiffusionModel::drift;
};

// dX_i = theta_i (mu_i - X1) dt + sigma_i / sqrt(1 + X1^2) dW_i, i = 1, 2.
class NonlinearDiffusion final : public DiffusionModel {
public:
    struct Params {
        double theta1 = 1.0, theta2 = 1.0;
        double mu1 = 0.0, mu2 = 0.0;
        double sigma1 = 1.0, sigma2 = 1.0;
    };

    explicit NonlinearDiffusion(Params p, Compensator c = Compensator::diagonal);
    void drift(std::span<const double> x, std::span<double> out) const override;
    void diffusion(std::span<const double> x, std::span<double> out) const override;
    void diffusion_jacobian(std::span<const double> x, std::span<double> out) const override;
    using DiffusionModel::diffusion;
    using DiffusionModel::diffusion_jacobian;
    using DiffusionModel::drift;

private:
    Params p_;
};

// dX = theta dt + sigma dW (d = 1). Constant coefficients: every level's
// discretized kernel is exact.
class LinearGaussianDiffusion final : public DiffusionModel {
public:
    LinearGaussianDiffusion(double theta, double sigma, Compensator c = Compensator::diagonal);
    void drift(std::span<const double> x, std::span<double> out) const override;
    void diffusion(std::span<const double> x, std::span<double> out) const override;
    void diffusion_jacobian(std::span<const double> x, std::span<double> out) const override;
    bool constant_diffusion() const noexcept override { return true; }
    bool constant_coefficients() const noexcept override { return true; }
    using DiffusionModel::diffusion;
    using DiffusionModel::diffusion_jacobian;
    using DiffusionModel::drift;

    double theta() const noexcept { return theta_; }
    double sigma() const noexcept { return sigma_; }

private:
    double theta_;
    double sigma_;
};

// --- builtin observation densities -----------------------------------------

// y ~ N(log x1, tau2). States with x1 <= 0 get log-density -infinity.
class LogNormalObservation final : public ObservationModel {
public:
    explicit LogNormalObservation(double tau2);
    double log_density(std::span<const double> x, std::span<const double> y) const override;
    void sample(std::span<const double> x, RandomStream& rng, std::span<double> y) const override;
    double tau2() const noexcept { return tau2_; }

private:
    double tau2_;
};

// y ~ N(mean of the state coordinates, tau2).
class MeanGaussianObservation final : public ObservationModel {
public:
    explicit MeanGaussianObservation(double tau2);
    double log_density(std::span<const double> x, std::span<const double> y) const override;
    void sample(std::span<const double> x, RandomStream& rng, std::span<double> y) const override;
    double tau2() const noexcept { return tau2_; }

private:
    double tau2_;
};

// y ~ Laplace(mean of the state coordinates, scale).
class MeanLaplaceObservation final : public ObservationModel {
public:
    explicit MeanLaplaceObservation(double scale);
    double log_density(std::span<const double> x, std::span<const double> y) const override;
    void sample(std::span<const double> x, RandomStream& rng, std::span<double> y) const override;

private:
    double scale_;
};

// g(x, y) = c for every x. Test hook: weights never move.
class ConstantObservation final : public ObservationModel {
public:
    explicit ConstantObservation(double log_c, std::size_t obs_dim = 1);
    double log_density(std::span<const double> x, std::span<const double> y) const override;
    void sample(std::span<const double> x, RandomStream& rng, std::span<double> y) const override;

private:
    double log_c_;
};

// --- state-space models ----------------------------------------------------

struct ModelSpec {
    std::string name;
    std::map<std::string, double> params;  // overrides of the builtin defaults
    std::optional<Vector> x0;
    Compensator compensator = Compensator::diagonal;
};

struct StateSpaceModel {
    std::string name;
    std::shared_ptr<const DiffusionModel> diffusion;
    std::shared_ptr<const ObservationModel> observation;
    Vector x0;
    // Resolved parameter values, defaults included.
    std::map<std::string, double> params;

    std::size_t dim() const { return diffusion->dim(); }
    void validate() const;
};

StateSpaceModel builtin_model(const ModelSpec& spec);
StateSpaceModel builtin_model(const std::string& name);

// Parameter names and defaults accepted by builtin_model for `name`.
std::map<std::string, double> builtin_defaults(const std::string& name);

double obs_logdensity(const ObservationModel& model, std::span<const double> x,
                      std::span<const double> y);

std::string to_string(Compensator c);
Compensator compensator_from_string(const std::string& s);

}  // namespace amlpf
