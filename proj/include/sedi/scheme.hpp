#pragma once

#include <functional>
#include <vector>

#include "sedi/diffusion.hpp"
#include "sedi/grid.hpp"
#include "sedi/payoffs.hpp"

namespace sedi {

/// Time dilatation t = rho * tau: solving the scaled model to transformed
/// time T0 equals solving the original to rho * T0. Small rho makes the
/// per-step iteration a contraction.
struct DilatationParams {
    double rho = 1.0;
    double T0 = 0.0;
};

struct SchemeOptions {
    int time_intervals = 8;   ///< slab slices per step
    int quadrature_order = 20;
    int l_max = 3;            ///< maximum number of correction terms
    double tol = 1e-8;        ///< stop once a correction's sup-norm drops below
    bool override_assumptions = false;
    double flow_max_step = 1e-3;
    int threads = 0;
};

/// Values of one series term on the grid at every slab time.
struct TermSlab {
    std::vector<std::vector<double>> slices;  ///< [time slice][node]
};

/// Partial sums u^1 + sum delta u^{2l+1} of the correction series on a tensor
/// grid, with per-term sup-norms and the fitted geometric contraction ratio.
struct SeriesSolution {
    explicit SeriesSolution(TensorGrid g) : grid(std::move(g)) {}

    TensorGrid grid;
    double rho = 1.0;
    double T0 = 0.0;
    int time_intervals = 8;

    std::vector<double> u1;                   ///< final-time values
    std::vector<std::vector<double>> deltas;  ///< final-time values per correction
    std::vector<double> term_norms;
    double fitted_contraction = 0.0;
    int truncation_level = 0;

    TermSlab u0_slab;
    TermSlab u1_slab;
    std::vector<TermSlab> delta_slabs;

    std::vector<double> total() const;
    double value_at(const VectorXd& x) const;  ///< multilinear interpolation of the total
};

/// Drift and sigma sigma^T scaled by rho (sigma by sqrt(rho)).
BlockSDE dilatate(const BlockSDE& model, double rho);

/// Vector Field Step. l = 0 transports the initial data along the complement
/// flow; l >= 1 solves the transport equation with the parabolic operator of
/// the previous odd term as source (zero initial data).
TermSlab vector_field_step(int l, const BlockSDE& scaled_model,
                           const std::function<double(const VectorXd&)>& data,
                           const TensorGrid& grid, double T0, const SchemeOptions& options);
TermSlab vector_field_step(int l, const BlockSDE& scaled_model, const TermSlab& prev_odd,
                           const TensorGrid& grid, double T0, const SchemeOptions& options);

/// Diffusion Step: per node, complement coordinates frozen, solves the
/// parabolic problem with the complement-drift term of the previous even
/// term as source. l = 0 carries the initial data; corrections start at 0.
TermSlab diffusion_step(int l, const BlockSDE& scaled_model, const TermSlab& prev_even,
                        const std::function<double(const VectorXd&)>& data, const TensorGrid& grid,
                        double T0, const SchemeOptions& options);

/// One local step: alternates vector-field and diffusion steps, accumulating
/// corrections until their sup-norm drops below tol or l_max is reached.
/// Throws numerical_error when the fitted ratio stays >= 1 after three terms.
SeriesSolution run_series(const BlockSDE& model,
                          const std::function<double(const VectorXd&)>& data,
                          const DilatationParams& dilatation, const GridSpec& grid_spec,
                          const SchemeOptions& options);
SeriesSolution run_series(const BlockSDE& model, const Payoff& payoff,
                          const DilatationParams& dilatation, const GridSpec& grid_spec,
                          const SchemeOptions& options);

/// Chains run_series over n_steps subintervals using the semigroup property;
/// each step's total feeds the next step through grid interpolation.
/// Requires n_steps * rho * T0 = T. T = 0 returns the payoff on the grid.
std::vector<SeriesSolution> time_march(const BlockSDE& model, const Payoff& payoff, double T,
                                       int n_steps, const DilatationParams& dilatation,
                                       const GridSpec& grid_spec, const SchemeOptions& options);

/// Largest candidate (descending list expected) whose first three series
/// terms contract with fitted ratio <= 0.5. Empirical stand-in for the
/// a-priori step-size constant.
double select_rho(const BlockSDE& model, const Payoff& payoff, const GridSpec& grid_spec,
                  const std::vector<double>& candidates, double T0, const SchemeOptions& options);

/// Sup-norm over interior slab points of
///   d(total)/dtau - rho L total + rho sum_{i>d} mu_i d(delta^{2L+1})/dx_i,
/// which the truncated series satisfies up to discretization error.
double residual_norm(const BlockSDE& model, const SeriesSolution& solution);

}  // namespace sedi
