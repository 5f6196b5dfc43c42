#pragma once

#include <cstdint>
#include <functional>

#include "sedi/models.hpp"
#include "sedi/rng.hpp"

namespace sedi {

/// Leading-order transition kernel on the diffusion subspace: a Gaussian with
/// the coefficients frozen at the start point. Exact for constant
/// coefficients.
struct DensityKernel {
    VectorXd mean;        ///< x^d + mu^d(x) t
    MatrixXd covariance;  ///< sigma sigma^T(x) t
    double t = 0.0;
    MatrixXd chol_lower;  ///< L with L L^T = covariance
    double log_norm = 0.0;

    int dim() const { return static_cast<int>(mean.size()); }
};

/// Frozen-coefficient Gaussian kernel of the model at x over elapsed time t.
/// Throws numerical_error when the diffusion block is singular at x (the
/// leading-order kernel cannot handle a Hörmander-degenerate block).
DensityKernel gaussian_kernel(const BlockSDE& model, const VectorXd& x, double t);

/// Kernel with explicit mean/covariance (no model evaluation).
DensityKernel make_kernel(const VectorXd& mean, const MatrixXd& covariance, double t);

/// Multivariate normal density value.
double kernel_density(const DensityKernel& kernel, const VectorXd& y);

/// Sampling/evaluation distribution for weighted estimators.
struct Proposal {
    VectorXd mean;
    MatrixXd covariance;
    MatrixXd chol_lower;
    double log_norm = 0.0;

    double density(const VectorXd& y) const;
    VectorXd sample(PathRng& rng) const;

    /// Kernel mean with covariance inflated by the given factor.
    static Proposal from_kernel(const DensityKernel& kernel, double inflation);
    static Proposal gaussian(const VectorXd& mean, const MatrixXd& covariance);
};

/// Likelihood ratio p(zeta) / phi(zeta); throws when the proposal density
/// vanishes at the draw.
double weight(const DensityKernel& target, const Proposal& proposal, const VectorXd& zeta);

struct DiffusionStepOptions {
    int quadrature_order = 20;  ///< Gauss-Hermite order per dimension (d <= 3)
    int time_intervals = 8;     ///< composite-Simpson intervals for the source
    int mc_paths = 20000;       ///< weighted-sampling path count for d > 3
    std::uint64_t seed = 2024;
    double proposal_inflation = 1.5;
};

/// One parabolic step on the diffusion subspace with complement coordinates
/// frozen at x:
///   ∫ data(y) p(tau, x^d; 0, y) dy + ∫_0^tau ∫ source(s, y) p(tau, x^d; s, y) dy ds
/// with p the frozen Gaussian kernel. Spatial integrals by tensorized
/// Gauss-Hermite for d <= 3, weighted Monte-Carlo sampling beyond; the time
/// integral by composite Simpson. A potential on the model enters through a
/// symmetrized frozen factor exp((c(x) + c(y)) (tau - s) / 2).
double solve_diffusion_step(const BlockSDE& model,
                            const std::function<double(const VectorXd&)>& data,
                            const std::function<double(double, const VectorXd&)>& source,
                            double tau, const VectorXd& x,
                            const DiffusionStepOptions& options = {});

}  // namespace sedi
