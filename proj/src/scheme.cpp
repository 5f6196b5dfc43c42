#include "sedi/scheme.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "sedi/errors.hpp"
#include "sedi/parallel.hpp"
#include "sedi/quadrature.hpp"
#include "sedi/transport.hpp"

namespace sedi {

std::vector<double> SeriesSolution::total() const {
    std::vector<double> sum = u1;
    for (const auto& delta : deltas)
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += delta[k];
    return sum;
}

double SeriesSolution::value_at(const VectorXd& x) const { return grid.interpolate(total(), x); }

BlockSDE dilatate(const BlockSDE& model, double rho) {
    if (!(rho > 0.0) || rho > 1.0) throw std::invalid_argument("dilatate: rho must lie in (0, 1]");
    BlockSDE scaled = model;
    const DriftFn drift = model.drift;
    scaled.drift = [drift, rho](const VectorXd& x) { return VectorXd(rho * drift(x)); };
    const SigmaFn sigma = model.sigma;
    const double root = std::sqrt(rho);
    scaled.sigma = [sigma, root](const VectorXd& x) { return MatrixXd(root * sigma(x)); };
    if (model.potential) {
        const ScalarFieldFn pot = model.potential;
        scaled.potential = [pot, rho](const VectorXd& x) { return rho * pot(x); };
    }
    return scaled;
}

namespace {

double sup_norm(const std::vector<double>& values) {
    double norm = 0.0;
    for (double v : values) norm = std::max(norm, std::abs(v));
    return norm;
}

double fitted_ratio(const std::vector<double>& norms) {
    std::vector<double> ratios;
    for (std::size_t k = 1; k < norms.size(); ++k)
        if (norms[k - 1] > 1e-300) ratios.push_back(norms[k] / norms[k - 1]);
    if (ratios.empty()) return 0.0;
    double log_acc = 0.0;
    for (double r : ratios) log_acc += std::log(std::max(r, 1e-300));
    return std::exp(log_acc / static_cast<double>(ratios.size()));
}

}  // namespace

TermSlab vector_field_step(int l, const BlockSDE& scaled_model,
                           const std::function<double(const VectorXd&)>& data,
                           const TensorGrid& grid, double T0, const SchemeOptions& options) {
    if (l != 0) throw std::invalid_argument("vector_field_step: data form is the l = 0 step");
    if (!data) throw std::invalid_argument("vector_field_step: initial data required");
    const int J = options.time_intervals;
    const int n = scaled_model.n;
    const int d = scaled_model.d;

    TermSlab out;
    out.slices.assign(static_cast<std::size_t>(J) + 1, std::vector<double>(grid.size(), 0.0));
    parallel_for(
        grid.size(),
        [&](std::size_t node) {
            const VectorXd x = grid.point(node);
            Flow flw{complement_flow_field(scaled_model, x.head(d)), options.flow_max_step};
            const std::vector<VectorXd> table = flw.table(x.tail(n - d), T0, J);
            VectorXd y(n);
            y.head(d) = x.head(d);
            for (int j = 0; j <= J; ++j) {
                y.tail(n - d) = table[static_cast<std::size_t>(j)];
                const double v = data(y);
                if (!std::isfinite(v)) throw numerical_error("vector_field_step: non-finite data value");
                out.slices[static_cast<std::size_t>(j)][node] = v;
            }
        },
        options.threads);
    return out;
}

TermSlab vector_field_step(int l, const BlockSDE& scaled_model, const TermSlab& prev_odd,
                           const TensorGrid& grid, double T0, const SchemeOptions& options) {
    if (l < 1) throw std::invalid_argument("vector_field_step: slab form is for l >= 1");
    const int J = options.time_intervals;
    if (static_cast<int>(prev_odd.slices.size()) != J + 1)
        throw std::invalid_argument("vector_field_step: previous term has wrong slice count");
    const int n = scaled_model.n;
    const int d = scaled_model.d;
    const double dt = T0 / J;

    // Parabolic operator of the previous odd term, from grid stencils.
    std::vector<std::vector<std::vector<double>>> grad(static_cast<std::size_t>(J) + 1);
    std::vector<std::vector<std::vector<double>>> hess(static_cast<std::size_t>(J) + 1);
    for (int k = 0; k <= J; ++k) {
        auto& gk = grad[static_cast<std::size_t>(k)];
        auto& hk = hess[static_cast<std::size_t>(k)];
        gk.resize(static_cast<std::size_t>(d));
        hk.resize(static_cast<std::size_t>(d) * static_cast<std::size_t>(d));
        const auto& slice = prev_odd.slices[static_cast<std::size_t>(k)];
        for (int i = 0; i < d; ++i) gk[static_cast<std::size_t>(i)] = grid.derivative(slice, i);
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                hk[static_cast<std::size_t>(i * d + j)] = grid.mixed_derivative(slice, i, j);
                if (j != i) hk[static_cast<std::size_t>(j * d + i)] = hk[static_cast<std::size_t>(i * d + j)];
            }
    }

    TermSlab out;
    out.slices.assign(static_cast<std::size_t>(J) + 1, std::vector<double>(grid.size(), 0.0));
    parallel_for(
        grid.size(),
        [&](std::size_t node) {
            const VectorXd x = grid.point(node);
            Flow flw{complement_flow_field(scaled_model, x.head(d)), options.flow_max_step};
            const std::vector<VectorXd> table = flw.table(x.tail(n - d), T0, J);
            VectorXd y(n);
            y.head(d) = x.head(d);
            // Source along the characteristic: S(s_k, x^d, F^{s_j - s_k} x^c).
            auto source_at = [&](int k, int flow_idx) {
                y.tail(n - d) = table[static_cast<std::size_t>(flow_idx)];
                const MatrixXd a = scaled_model.diffusion_matrix(y);
                const VectorXd mu = scaled_model.drift_diffusion(y);
                double acc = 0.0;
                const auto& gk = grad[static_cast<std::size_t>(k)];
                const auto& hk = hess[static_cast<std::size_t>(k)];
                for (int i = 0; i < d; ++i) {
                    acc += mu[i] * grid.interpolate(gk[static_cast<std::size_t>(i)], y);
                    for (int jj = 0; jj < d; ++jj)
                        acc += 0.5 * a(i, jj) * grid.interpolate(hk[static_cast<std::size_t>(i * d + jj)], y);
                }
                return acc;
            };
            std::vector<double> integrand;
            for (int j = 1; j <= J; ++j) {
                integrand.assign(static_cast<std::size_t>(j) + 1, 0.0);
                for (int k = 0; k <= j; ++k) integrand[static_cast<std::size_t>(k)] = source_at(k, j - k);
                out.slices[static_cast<std::size_t>(j)][node] = simpson_uniform(integrand, dt);
            }
        },
        options.threads);
    return out;
}

TermSlab diffusion_step(int l, const BlockSDE& scaled_model, const TermSlab& prev_even,
                        const std::function<double(const VectorXd&)>& data, const TensorGrid& grid,
                        double T0, const SchemeOptions& options) {
    const int J = options.time_intervals;
    if (static_cast<int>(prev_even.slices.size()) != J + 1)
        throw std::invalid_argument("diffusion_step: previous term has wrong slice count");
    if (l == 0 && !data) throw std::invalid_argument("diffusion_step: l = 0 needs initial data");
    const int n = scaled_model.n;
    const int d = scaled_model.d;
    const int nc = n - d;
    const double dt = T0 / J;

    // Complement gradient of the previous even term per slice.
    std::vector<std::vector<std::vector<double>>> cgrad(static_cast<std::size_t>(J) + 1);
    for (int k = 0; k <= J; ++k) {
        cgrad[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(nc));
        for (int i = 0; i < nc; ++i)
            cgrad[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] =
                grid.derivative(prev_even.slices[static_cast<std::size_t>(k)], d + i);
    }

    DiffusionStepOptions dopt;
    dopt.quadrature_order = options.quadrature_order;
    dopt.time_intervals = options.time_intervals;

    TermSlab out;
    out.slices.assign(static_cast<std::size_t>(J) + 1, std::vector<double>(grid.size(), 0.0));
    parallel_for(
        grid.size(),
        [&](std::size_t node) {
            const VectorXd x = grid.point(node);
            out.slices[0][node] = data ? data(x) : 0.0;

            std::function<double(const VectorXd&)> data_d;
            if (data) {
                data_d = [&grid, &data, &x, n, d, nc](const VectorXd& yd) {
                    VectorXd full(n);
                    full.head(d) = yd;
                    full.tail(nc) = x.tail(nc);
                    return data(full);
                };
            }
            std::function<double(double, const VectorXd&)> source_d;
            if (nc > 0) {
                source_d = [&](double s, const VectorXd& yd) {
                    VectorXd full(n);
                    full.head(d) = yd;
                    full.tail(nc) = x.tail(nc);
                    const VectorXd b = scaled_model.drift(full);
                    double acc = 0.0;
                    for (int i = 0; i < nc; ++i) {
                        // time-linear evaluation over the per-slice arrays
                        const int last = J;
                        const double u = s / dt;
                        double gval;
                        if (u <= 0.0) {
                            gval = grid.interpolate(cgrad[0][static_cast<std::size_t>(i)], full);
                        } else if (u >= last) {
                            gval = grid.interpolate(cgrad[static_cast<std::size_t>(last)][static_cast<std::size_t>(i)], full);
                        } else {
                            const int k = static_cast<int>(u);
                            const double w = u - k;
                            gval = (1.0 - w) * grid.interpolate(cgrad[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)], full) +
                                   w * grid.interpolate(cgrad[static_cast<std::size_t>(k) + 1][static_cast<std::size_t>(i)], full);
                        }
                        acc += b[d + i] * gval;
                    }
                    return acc;
                };
            }
            for (int j = 1; j <= J; ++j)
                out.slices[static_cast<std::size_t>(j)][node] =
                    solve_diffusion_step(scaled_model, data_d, source_d, j * dt, x, dopt);
        },
        options.threads);
    return out;
}

namespace {

SeriesSolution make_solution(TensorGrid grid, const DilatationParams& dilatation,
                             const SchemeOptions& options) {
    SeriesSolution sol(std::move(grid));
    sol.rho = dilatation.rho;
    sol.T0 = dilatation.T0;
    sol.time_intervals = options.time_intervals;
    return sol;
}

}  // namespace

SeriesSolution run_series(const BlockSDE& model,
                          const std::function<double(const VectorXd&)>& data,
                          const DilatationParams& dilatation, const GridSpec& grid_spec,
                          const SchemeOptions& options) {
    if (!(dilatation.rho > 0.0) || dilatation.rho > 1.0)
        throw std::invalid_argument("run_series: rho must lie in (0, 1]");
    if (!(dilatation.T0 > 0.0)) throw std::invalid_argument("run_series: T0 must be > 0");
    grid_spec.validate();
    if (static_cast<int>(grid_spec.axes.size()) != model.n)
        throw std::invalid_argument("run_series: grid dimension must match the model");

    const BlockSDE scaled = dilatate(model, dilatation.rho);
    SeriesSolution sol = make_solution(TensorGrid(grid_spec), dilatation, options);

    sol.u0_slab = vector_field_step(0, scaled, data, sol.grid, dilatation.T0, options);
    sol.u1_slab = diffusion_step(0, scaled, sol.u0_slab, data, sol.grid, dilatation.T0, options);
    sol.u1 = sol.u1_slab.slices.back();

    TermSlab prev_odd = sol.u1_slab;
    for (int l = 1; l <= options.l_max; ++l) {
        const TermSlab even = vector_field_step(l, scaled, prev_odd, sol.grid, dilatation.T0, options);
        TermSlab odd = diffusion_step(l, scaled, even, nullptr, sol.grid, dilatation.T0, options);
        const double norm = sup_norm(odd.slices.back());
        sol.delta_slabs.push_back(odd);
        sol.deltas.push_back(odd.slices.back());
        sol.term_norms.push_back(norm);
        sol.truncation_level = l;
        if (norm < options.tol) break;
        if (sol.term_norms.size() >= 3) {
            const double c = fitted_ratio(sol.term_norms);
            if (c >= 1.0)
                throw numerical_error(
                    "run_series: series not contracting (fitted ratio c >= 1); reduce rho");
        }
        prev_odd = std::move(odd);
    }
    sol.fitted_contraction = fitted_ratio(sol.term_norms);
    return sol;
}

SeriesSolution run_series(const BlockSDE& model, const Payoff& payoff,
                          const DilatationParams& dilatation, const GridSpec& grid_spec,
                          const SchemeOptions& options) {
    const Payoff::AssumptionReport report = payoff.check_assumptions(model);
    if (!report.ok() && !options.override_assumptions)
        throw std::invalid_argument("run_series: payoff violates terminal-data conditions: " +
                                    report.describe());
    return run_series(model, payoff.f, dilatation, grid_spec, options);
}

std::vector<SeriesSolution> time_march(const BlockSDE& model, const Payoff& payoff, double T,
                                       int n_steps, const DilatationParams& dilatation,
                                       const GridSpec& grid_spec, const SchemeOptions& options) {
    if (T < 0.0) throw std::invalid_argument("time_march: T must be >= 0");
    const Payoff::AssumptionReport report = payoff.check_assumptions(model);
    if (!report.ok() && !options.override_assumptions)
        throw std::invalid_argument("time_march: payoff violates terminal-data conditions: " +
                                    report.describe());

    if (T == 0.0) {
        grid_spec.validate();
        SeriesSolution sol = make_solution(TensorGrid(grid_spec), dilatation, options);
        sol.T0 = 0.0;
        sol.u1.resize(sol.grid.size());
        for (std::size_t k = 0; k < sol.grid.size(); ++k) sol.u1[k] = payoff.f(sol.grid.point(k));
        sol.u1_slab.slices.push_back(sol.u1);
        return {sol};
    }

    if (n_steps < 1) throw std::invalid_argument("time_march: n_steps must be >= 1");
    if (std::abs(n_steps * dilatation.rho * dilatation.T0 - T) > 1e-10 * std::max(1.0, T))
        throw std::invalid_argument("time_march: requires n_steps * rho * T0 = T");

    std::vector<SeriesSolution> steps;
    std::function<double(const VectorXd&)> data = payoff.f;
    for (int i = 0; i < n_steps; ++i) {
        try {
            steps.push_back(run_series(model, data, dilatation, grid_spec, options));
        } catch (const numerical_error& err) {
            throw numerical_error("time_march: step " + std::to_string(i) + " failed: " + err.what());
        }
        auto values = std::make_shared<std::vector<double>>(steps.back().total());
        auto grid_ptr = std::make_shared<TensorGrid>(steps.back().grid);
        data = [values, grid_ptr](const VectorXd& x) { return grid_ptr->interpolate(*values, x); };
    }
    return steps;
}

double select_rho(const BlockSDE& model, const Payoff& payoff, const GridSpec& grid_spec,
                  const std::vector<double>& candidates, double T0, const SchemeOptions& options) {
    if (candidates.empty()) throw std::invalid_argument("select_rho: empty candidate list");
    SchemeOptions probe = options;
    probe.l_max = 2;
    probe.tol = 0.0;
    for (double rho : candidates) {
        if (!(rho > 0.0) || rho > 1.0)
            throw std::invalid_argument("select_rho: candidates must lie in (0, 1]");
        try {
            const SeriesSolution sol = run_series(model, payoff, {rho, T0}, grid_spec, probe);
            if (sol.fitted_contraction <= 0.5) return rho;
        } catch (const numerical_error&) {
            // not contracting at this rho; try the next candidate
        }
    }
    throw numerical_error("select_rho: no candidate contracts; supply smaller rho candidates");
}

double residual_norm(const BlockSDE& model, const SeriesSolution& solution) {
    if (solution.delta_slabs.empty() || solution.u1_slab.slices.size() < 3) return 0.0;
    const TensorGrid& grid = solution.grid;
    const BlockSDE scaled = dilatate(model, solution.rho);
    const int n = scaled.n;
    const int d = scaled.d;
    const int J = static_cast<int>(solution.u1_slab.slices.size()) - 1;
    const double dt = solution.T0 / J;

    // Total slab and the last correction slab.
    std::vector<std::vector<double>> total = solution.u1_slab.slices;
    for (const auto& slab : solution.delta_slabs)
        for (int j = 0; j <= J; ++j)
            for (std::size_t k = 0; k < total[static_cast<std::size_t>(j)].size(); ++k)
                total[static_cast<std::size_t>(j)][k] += slab.slices[static_cast<std::size_t>(j)][k];
    const auto& last_delta = solution.delta_slabs.back().slices;

    double sup = 0.0;
    for (int j = 1; j < J; ++j) {
        const auto& slice = total[static_cast<std::size_t>(j)];
        std::vector<std::vector<double>> first(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) first[static_cast<std::size_t>(i)] = grid.derivative(slice, i);
        std::vector<std::vector<double>> second(static_cast<std::size_t>(d) * static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i)
            for (int jj = i; jj < d; ++jj) {
                second[static_cast<std::size_t>(i * d + jj)] = grid.mixed_derivative(slice, i, jj);
                if (jj != i) second[static_cast<std::size_t>(jj * d + i)] = second[static_cast<std::size_t>(i * d + jj)];
            }
        std::vector<std::vector<double>> delta_grad(static_cast<std::size_t>(n - d));
        for (int i = 0; i < n - d; ++i)
            delta_grad[static_cast<std::size_t>(i)] = grid.derivative(last_delta[static_cast<std::size_t>(j)], d + i);

        for (std::size_t node = 0; node < grid.size(); ++node) {
            const std::vector<int> idx = grid.indices(node);
            bool interior = true;
            for (int axis = 0; axis < n; ++axis)
                if (idx[static_cast<std::size_t>(axis)] == 0 ||
                    idx[static_cast<std::size_t>(axis)] == grid.spec().axes[static_cast<std::size_t>(axis)].nodes - 1)
                    interior = false;
            if (!interior) continue;

            const VectorXd x = grid.point(node);
            const double du_dt = (total[static_cast<std::size_t>(j) + 1][node] -
                                  total[static_cast<std::size_t>(j) - 1][node]) /
                                 (2.0 * dt);
            const MatrixXd a = scaled.diffusion_matrix(x);
            const VectorXd b = scaled.drift(x);
            double lu = 0.0;
            for (int i = 0; i < d; ++i)
                for (int jj = 0; jj < d; ++jj)
                    lu += 0.5 * a(i, jj) * second[static_cast<std::size_t>(i * d + jj)][node];
            for (int i = 0; i < n; ++i) lu += b[i] * first[static_cast<std::size_t>(i)][node];
            if (scaled.has_potential()) lu += scaled.potential_at(x) * slice[node];

            double rhs = 0.0;
            for (int i = 0; i < n - d; ++i)
                rhs -= b[d + i] * delta_grad[static_cast<std::size_t>(i)][node];

            sup = std::max(sup, std::abs(du_dt - lu - rhs));
        }
    }
    return sup;
}

}  // namespace sedi
