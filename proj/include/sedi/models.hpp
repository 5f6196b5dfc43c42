#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sedi {

using Eigen::MatrixXd;
using Eigen::VectorXd;

using DriftFn = std::function<VectorXd(const VectorXd&)>;
using SigmaFn = std::function<MatrixXd(const VectorXd&)>;
using ScalarFieldFn = std::function<double(const VectorXd&)>;

/// Linear-in-log rate map of a rotated market model: K = to_log * state,
/// rates = exp(K) componentwise. Absent on models whose state is already
/// the natural payoff coordinate.
struct LogRateMap {
    MatrixXd to_log;
};

/// Block-structured semi-elliptic SDE on R^n. Diffusion loads only the first
/// d coordinates; coordinates d+1..n carry drift alone (the complement field
/// B). The generator convention is fixed throughout the project as
///   (1/2) sigma sigma^T : D^2  +  drift . grad  +  potential.
struct BlockSDE {
    int n = 0;  ///< state dimension
    int d = 0;  ///< diffusion-subspace dimension (first d coordinates)
    int m = 0;  ///< Brownian factors
    DriftFn drift;                       ///< R^n -> R^n
    SigmaFn sigma;                       ///< R^n -> R^{d x m}; rows d+1..n are zero by construction
    ScalarFieldFn potential;             ///< optional zeroth-order term; empty means 0
    std::optional<LogRateMap> rate_map;  ///< state -> rates, when the model has one
    std::string kind;                    ///< config label ("toy", "reduced_lmm", ...)

    bool has_potential() const { return static_cast<bool>(potential); }
    double potential_at(const VectorXd& x) const { return potential ? potential(x) : 0.0; }

    /// n x m loading with rows d+1..n identically zero.
    MatrixXd sigma_full(const VectorXd& x) const;
    /// sigma sigma^T on the diffusion subspace, d x d.
    MatrixXd diffusion_matrix(const VectorXd& x) const;
    /// First d drift components.
    VectorXd drift_diffusion(const VectorXd& x) const;
    /// Complement field B: drift components d+1..n (size n-d).
    VectorXd complement_field(const VectorXd& x) const;
    /// Payoff coordinates: through rate_map when present, identity otherwise.
    VectorXd rates(const VectorXd& x) const;
};

/// Checks dimensions, finiteness, and a sampled Lipschitz difference-quotient
/// bound on [-box_half_width, box_half_width]^n. Throws std::invalid_argument.
void validate_block_sde(const BlockSDE& model, double box_half_width = 2.0, int samples = 64,
                        unsigned seed = 12345u);

/// Loading matrix F together with an orthonormal basis G of ker(F F^T).
struct FactorSplit {
    MatrixXd F;  ///< n x d
    MatrixXd G;  ///< n x (n-d), orthonormal columns, G^T F = 0
};

/// Cheyette short-rate state: X is the rate deviation, Y the convexity
/// accumulator. kappa and eta are functions of time.
struct CheyetteState {
    double X = 0.0;
    double Y = 0.0;
    std::function<double(double)> kappa;
    std::function<double(double)> eta;
};

/// Two-dimensional model dX1 = sigma dW, dX2 = mu dt.
BlockSDE make_toy_model(double sigma, double mu);

/// Factor-reduced lognormal LIBOR market model under the terminal measure,
/// rotated so the first d coordinates (F^T K) carry the diffusion and the
/// remaining n-d (G^T K) are drift-only. tenors must hold n+1 increasing
/// times; F is the n x d loading matrix; initial_rates the n positive rates.
BlockSDE make_reduced_lmm(const std::vector<double>& tenors, const MatrixXd& F,
                          const VectorXd& initial_rates);

/// Rotated initial state (F^T log L0, G^T log L0) matching make_reduced_lmm.
VectorXd reduced_lmm_state(const MatrixXd& F, const VectorXd& initial_rates);

/// Cheyette model dX = (Y - kappa X) dt + eta dW, dY = (eta^2 - 2 kappa Y) dt.
/// The engine is time-homogeneous, so kappa and eta must be constant on
/// [0, horizon]; time-varying inputs are rejected.
BlockSDE make_cheyette(const std::function<double(double)>& kappa,
                       const std::function<double(double)>& eta, double horizon = 1.0);

/// Heston model (full-diffusion reference, n = d = 2). The variance
/// coordinate is floored at zero inside the coefficients (full truncation).
BlockSDE make_heston(double mu, double kappa, double theta, double xi, double rho);

/// Orthonormal kernel basis of F F^T. Throws std::invalid_argument with the
/// numerical rank found when F is rank-deficient.
FactorSplit factor_split(const MatrixXd& F);

/// Numerical rank of the span of the diffusion fields at x, restricted to the
/// first d coordinates and augmented with iterated Lie brackets up to the
/// given depth. Brackets are [V,W](x) = J_W(x) V(x) - J_V(x) W(x) with
/// Jacobians by central differences, step 1e-5 (1 + |x|); the rank uses a
/// relative singular-value threshold of 1e-8.
int hoermander_rank(const BlockSDE& model, const VectorXd& x, int depth);

/// Orthonormal basis (columns) of the numerical intersection of the bracket
/// spans W_x over the sample points. An empty intersection yields n x 0.
MatrixXd invariant_subspace(const BlockSDE& model, const std::vector<VectorXd>& sample_points,
                            int depth);

}  // namespace sedi
