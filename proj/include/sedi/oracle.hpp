#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sedi/models.hpp"
#include "sedi/montecarlo.hpp"
#include "sedi/payoffs.hpp"

namespace sedi {

/// Exact value of the two-dimensional reference problem with terminal data
/// f(x1) + g(x2): Gaussian integral of f (64-point Gauss-Hermite) plus the
/// transported g(x2 + mu t). t = 0 evaluates the data directly.
double toy_exact(const std::function<double(double)>& f, const std::function<double(double)>& g,
                 double sigma, double mu, double t, const VectorXd& x);

/// Euler paths: states laid out paths x (steps+1) x n, recursion
/// Y_{k+1} = Y_k + b(Y_k) dt + sigma(Y_k) dW.
struct EulerPathSet {
    std::size_t paths = 0;
    std::size_t steps = 0;  ///< number of increments; states hold steps+1 slices
    int n = 0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> states;

    double state(std::size_t path, std::size_t step, int coord) const {
        return states[(path * (steps + 1) + step) * static_cast<std::size_t>(n) +
                      static_cast<std::size_t>(coord)];
    }
    VectorXd terminal(std::size_t path) const;
};

EulerPathSet euler_simulate(const BlockSDE& model, const VectorXd& x0, double T, std::size_t steps,
                            std::size_t paths, std::uint64_t seed);

/// Terminal-payoff average over streamed Euler paths (no path storage).
Estimate euler_price(const BlockSDE& model, const Payoff& payoff, const VectorXd& x0, double T,
                     std::size_t steps, std::size_t paths, std::uint64_t seed);

/// Central difference of a deterministic pricer (fix the seed for common
/// random numbers). h = 0 uses the default 1e-3 (1 + |x_coord|).
double fd_greek(const std::function<double(const VectorXd&)>& pricer, const VectorXd& x, int coord,
                double h = 0.0);

/// Reference model with a pathwise exact terminal law, for strong-order
/// measurements. sigma = 0 degenerates to the exact ODE solution.
struct GbmReference {
    BlockSDE model;
    double mu = 0.0;
    double sigma = 0.0;
    /// Exact X_T given the terminal Brownian value W_T.
    double exact_terminal(double x0, double T, double WT) const;
};

GbmReference make_gbm(double mu, double sigma);

/// Strong order fitted from E|X_T - Y_T| over a ladder of step counts with
/// common Brownian increments (coarse increments summed from the finest).
/// Needs at least three rungs.
double strong_order(const GbmReference& reference, double x0, double T,
                    const std::vector<int>& steps_ladder, std::size_t paths, std::uint64_t seed);

struct StrongOrderTable {
    std::vector<double> dt;
    std::vector<double> error;  ///< E|X_T - Y_T| per rung
    double gamma = 0.0;         ///< fitted log-log slope
};

StrongOrderTable strong_order_table(const GbmReference& reference, double x0, double T,
                                    const std::vector<int>& steps_ladder, std::size_t paths,
                                    std::uint64_t seed);

/// Flat binary dump: uint64 paths, steps, n; double dt; uint64 seed; then the
/// row-major states.
void write_euler_paths(const std::string& path, const EulerPathSet& set);
EulerPathSet read_euler_paths(const std::string& path);

}  // namespace sedi
