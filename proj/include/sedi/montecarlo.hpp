#pragma once

#include <cstdint>
#include <functional>

#include "sedi/diffusion.hpp"
#include "sedi/payoffs.hpp"
#include "sedi/scheme.hpp"

namespace sedi {

/// A Monte-Carlo result. Reproducible bit-exactly for fixed (seed, paths);
/// wall_ms is informational only and never enters CSV files the CLI compares.
struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    double wall_ms = 0.0;
};

struct McOptions {
    int time_intervals = 8;          ///< composite-Simpson intervals for Duhamel terms
    double proposal_inflation = 1.5; ///< covariance inflation of the default proposal
    /// Horizon of the time-homogeneous proposal used by the naive delta
    /// estimators (the proposal must not shrink with tau there).
    double reference_time = 1.0;
    bool override_assumptions = false;
    int threads = 0;
    double flow_max_step = 1e-3;
};

/// Weighted Monte-Carlo price of the first-order representation u^1:
/// payoff term f(zeta, x^c) p/phi plus the Duhamel source integrated by
/// composite Simpson, one proposal draw per path. Pass a dilatated model to
/// price in transformed time.
Estimate price_first_order(const BlockSDE& model, const Payoff& payoff, double tau,
                           const VectorXd& x, std::size_t paths, std::uint64_t seed,
                           const McOptions& options = {});

/// Diffusion-coordinate derivatives of a previous series term, as functions
/// of (s, full state). Built from scheme grids or from closed forms in tests.
struct TermEvaluator {
    std::function<VectorXd(double, const VectorXd&)> grad_diffusion;
    std::function<MatrixXd(double, const VectorXd&)> hess_diffusion;
};

/// Evaluator over a stored series term: term = 0 is u^1 (the source of the
/// first correction), term = l >= 1 the l-th correction.
TermEvaluator series_term_evaluator(const SeriesSolution& solution, int term);

/// Weighted Monte-Carlo evaluation of the correction delta u^{2l+1} from the
/// previous odd term, with the same proposal and weight machinery as the
/// price. Exactly zero (not just in expectation) when the complement drift
/// vanishes.
Estimate correction_term(const BlockSDE& model, int l, const TermEvaluator& prev_term, double tau,
                         const VectorXd& x, std::size_t paths, std::uint64_t seed,
                         const McOptions& options = {});

/// Naive delta: likelihood-ratio (analytic Gaussian score) in the diffusion
/// coordinates, pathwise payoff-gradient in the complement coordinates. Uses
/// a time-homogeneous proposal; its variance is unbounded as tau drops.
Estimate delta_naive(const BlockSDE& model, const Payoff& payoff, double tau, const VectorXd& x,
                     int coord, std::size_t paths, std::uint64_t seed,
                     const McOptions& options = {});

/// Sample reparametrization zeta = g(t, x^d, xi) with standard-normal base
/// variable xi; the xi-Jacobian must be nonsingular at every draw.
struct ControlFunction {
    std::function<VectorXd(double, const VectorXd&, const VectorXd&)> g;
    std::function<MatrixXd(double, const VectorXd&, const VectorXd&)> jacobian_xi;

    /// g(t, x, xi) = x + sqrt(t) chol(sigma sigma^T(x)) xi.
    static ControlFunction standard(const BlockSDE& model);
};

/// Controlled delta: the sample point moves with x through g (common base
/// draws), so the differentiated estimator keeps bounded variance as tau
/// drops to zero.
Estimate delta_controlled(const BlockSDE& model, const Payoff& payoff,
                          const ControlFunction& control, double tau, const VectorXd& x, int coord,
                          std::size_t paths, std::uint64_t seed, const McOptions& options = {});

}  // namespace sedi
