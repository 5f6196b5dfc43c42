#include "sedi/montecarlo.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "sedi/errors.hpp"
#include "sedi/parallel.hpp"
#include "sedi/quadrature.hpp"
#include "sedi/rng.hpp"
#include "sedi/transport.hpp"

namespace sedi {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Estimate reduce_paths(const std::vector<double>& values, std::uint64_t seed, double wall_ms) {
    const std::size_t m = values.size();
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var = m > 1 ? var / static_cast<double>(m - 1) : 0.0;
    Estimate est;
    est.value = mean;
    est.std_error = std::sqrt(var / static_cast<double>(m));
    est.paths = m;
    est.seed = seed;
    est.wall_ms = wall_ms;
    return est;
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

// Flow positions and flow Jacobians of the complement characteristics at the
// Simpson nodes, for a frozen diffusion coordinate.
struct FlowData {
    std::vector<VectorXd> points;   // F^{s_j} x^c
    std::vector<MatrixXd> jacobian; // dF^{s_j} x^c / dx^c
};

FlowData flow_data(const BlockSDE& model, const VectorXd& x, double tau, int intervals,
                   double max_step) {
    const int nc = model.n - model.d;
    FlowData out;
    Flow flw{complement_flow_field(model, x.head(model.d)), max_step};
    out.points = flw.table(x.tail(nc), tau, intervals);
    out.jacobian.assign(static_cast<std::size_t>(intervals) + 1, MatrixXd::Identity(nc, nc));
    if (nc == 0) return out;
    for (int i = 0; i < nc; ++i) {
        const double h = 1e-5 * (1.0 + std::abs(x[model.d + i]));
        VectorXd cp = x.tail(nc), cm = x.tail(nc);
        cp[i] += h;
        cm[i] -= h;
        const std::vector<VectorXd> tp = flw.table(cp, tau, intervals);
        const std::vector<VectorXd> tm = flw.table(cm, tau, intervals);
        for (int j = 0; j <= intervals; ++j)
            out.jacobian[static_cast<std::size_t>(j)].col(i) =
                (tp[static_cast<std::size_t>(j)] - tm[static_cast<std::size_t>(j)]) / (2.0 * h);
    }
    return out;
}

// Shared per-call context for the weighted representation at (model, tau, x).
struct Representation {
    const BlockSDE* model = nullptr;
    double tau = 0.0;
    VectorXd x;
    int n = 0, d = 0, nc = 0;
    VectorXd mu_d;
    MatrixXd a;
    int intervals = 8;
    double dt = 0.0;
    std::vector<DensityKernel> kernels;  // kernels[j]: elapsed tau - s_j, j < intervals
    FlowData flows;
    bool has_pot = false;
    double pot_x = 0.0;

    VectorXd full(const VectorXd& yd) const {
        VectorXd f(n);
        f.head(d) = yd;
        f.tail(nc) = x.tail(nc);
        return f;
    }
    VectorXd full_flowed(const VectorXd& yd, int j) const {
        VectorXd f(n);
        f.head(d) = yd;
        f.tail(nc) = flows.points[static_cast<std::size_t>(j)];
        return f;
    }
    double pot_factor(const VectorXd& zeta, double span) const {
        if (!has_pot) return 1.0;
        return std::exp(0.5 * span * (pot_x + model->potential_at(full(zeta))));
    }
    // Duhamel source core at node j: sum_i mu_{d+i}(zeta, x^c) [J^T grad_c f](...).
    double source_core(const Payoff& payoff, const VectorXd& yd, int j) const {
        if (nc == 0) return 0.0;
        const VectorXd b = model->drift(full(yd));
        const VectorXd grad = payoff.complement_gradient_at(full_flowed(yd, j), d);
        const VectorXd pulled = flows.jacobian[static_cast<std::size_t>(j)].transpose() * grad;
        double acc = 0.0;
        for (int i = 0; i < nc; ++i) acc += b[d + i] * pulled[i];
        return acc;
    }
};

Representation make_representation(const BlockSDE& model, double tau, const VectorXd& x,
                                   const McOptions& options) {
    Representation rep;
    rep.model = &model;
    rep.tau = tau;
    rep.x = x;
    rep.n = model.n;
    rep.d = model.d;
    rep.nc = model.n - model.d;
    rep.mu_d = model.drift_diffusion(x);
    rep.a = model.diffusion_matrix(x);
    rep.intervals = options.time_intervals;
    rep.dt = tau / options.time_intervals;
    rep.kernels.reserve(static_cast<std::size_t>(rep.intervals));
    for (int j = 0; j < rep.intervals; ++j) {
        const double span = tau - j * rep.dt;
        rep.kernels.push_back(
            make_kernel(x.head(model.d) + span * rep.mu_d, span * rep.a, span));
    }
    rep.flows = flow_data(model, x, tau, rep.intervals, options.flow_max_step);
    rep.has_pot = model.has_potential();
    rep.pot_x = model.potential_at(x);
    return rep;
}

void require_assumptions(const BlockSDE& model, const Payoff& payoff, const McOptions& options) {
    const Payoff::AssumptionReport report = payoff.check_assumptions(model);
    if (!report.ok() && !options.override_assumptions)
        throw std::invalid_argument("weighted estimator: payoff violates terminal-data conditions: " +
                                    report.describe());
}

double standard_normal_log_density(const VectorXd& xi) {
    return -0.5 * xi.squaredNorm() - 0.5 * xi.size() * kLog2Pi;
}

}  // namespace

Estimate price_first_order(const BlockSDE& model, const Payoff& payoff, double tau,
                           const VectorXd& x, std::size_t paths, std::uint64_t seed,
                           const McOptions& options) {
    if (!(tau > 0.0)) throw std::invalid_argument("price_first_order: tau must be > 0");
    if (paths < 1) throw std::invalid_argument("price_first_order: needs at least one path");
    require_assumptions(model, payoff, options);
    Stopwatch watch;

    const Representation rep = make_representation(model, tau, x, options);
    const DensityKernel kernel_tau = rep.kernels[0];  // elapsed tau
    const Proposal proposal = Proposal::from_kernel(kernel_tau, options.proposal_inflation);
    const int J = rep.intervals;

    // Collapsed-kernel endpoint of the Duhamel integral (path-independent).
    const double endpoint = rep.source_core(payoff, x.head(rep.d), J);

    std::vector<double> values(paths, 0.0);
    parallel_for(
        paths,
        [&](std::size_t p) {
            PathRng rng(seed, p);
            const VectorXd zeta = proposal.sample(rng);
            double v = payoff.f(rep.full(zeta)) * weight(kernel_tau, proposal, zeta) *
                       rep.pot_factor(zeta, tau);
            if (rep.nc > 0) {
                std::vector<double> nodes(static_cast<std::size_t>(J) + 1);
                for (int j = 0; j < J; ++j) {
                    const double span = tau - j * rep.dt;
                    nodes[static_cast<std::size_t>(j)] =
                        rep.source_core(payoff, zeta, j) *
                        weight(rep.kernels[static_cast<std::size_t>(j)], proposal, zeta) *
                        rep.pot_factor(zeta, span);
                }
                nodes[static_cast<std::size_t>(J)] = endpoint;
                v += simpson_uniform(nodes, rep.dt);
            }
            if (!std::isfinite(v)) throw numerical_error("price_first_order: non-finite path value");
            values[p] = v;
        },
        options.threads);

    return reduce_paths(values, seed, watch.ms());
}

TermEvaluator series_term_evaluator(const SeriesSolution& solution, int term) {
    const TermSlab* slab = nullptr;
    if (term == 0) {
        slab = &solution.u1_slab;
    } else {
        if (term < 1 || term > static_cast<int>(solution.delta_slabs.size()))
            throw std::invalid_argument("series_term_evaluator: no such term");
        slab = &solution.delta_slabs[static_cast<std::size_t>(term) - 1];
    }
    const int slices = static_cast<int>(slab->slices.size());
    auto grid = std::make_shared<TensorGrid>(solution.grid);
    const int dim = grid->dim();
    // The diffusion dimension is not stored on the grid; recover it from the
    // slab context: derivatives are requested for the leading axes only, so
    // precompute first and second derivative arrays for every axis pair the
    // evaluator can be asked for. The caller's model fixes d at call time.
    auto slices_ptr = std::make_shared<std::vector<std::vector<double>>>(slab->slices);
    const double T0 = solution.T0;
    const double dt = slices > 1 ? T0 / (slices - 1) : 1.0;

    auto time_interp = [slices, dt](double s, auto&& eval) {
        const int last = slices - 1;
        const double u = s / dt;
        if (u <= 0.0) return eval(0);
        if (u >= last) return eval(last);
        const int k = static_cast<int>(u);
        const double w = u - k;
        return (1.0 - w) * eval(k) + w * eval(k + 1);
    };

    // Lazily build stencil caches per axis (values shared across calls).
    auto grad_cache = std::make_shared<std::vector<std::vector<std::vector<double>>>>();
    auto hess_cache = std::make_shared<std::vector<std::vector<std::vector<double>>>>();
    grad_cache->resize(static_cast<std::size_t>(dim));
    hess_cache->resize(static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim));
    for (int axis = 0; axis < dim; ++axis) {
        auto& per_slice = (*grad_cache)[static_cast<std::size_t>(axis)];
        per_slice.resize(static_cast<std::size_t>(slices));
        for (int k = 0; k < slices; ++k)
            per_slice[static_cast<std::size_t>(k)] = grid->derivative((*slices_ptr)[static_cast<std::size_t>(k)], axis);
    }
    for (int ia = 0; ia < dim; ++ia)
        for (int ib = ia; ib < dim; ++ib) {
            auto& per_slice = (*hess_cache)[static_cast<std::size_t>(ia * dim + ib)];
            per_slice.resize(static_cast<std::size_t>(slices));
            for (int k = 0; k < slices; ++k)
                per_slice[static_cast<std::size_t>(k)] =
                    grid->mixed_derivative((*slices_ptr)[static_cast<std::size_t>(k)], ia, ib);
        }

    TermEvaluator evaluator;
    evaluator.grad_diffusion = [grid, grad_cache, time_interp](double s, const VectorXd& state) {
        // Gradient over every axis; consumers read the leading d components.
        const int dim = grid->dim();
        VectorXd g(dim);
        for (int axis = 0; axis < dim; ++axis)
            g[axis] = time_interp(s, [&](int k) {
                return grid->interpolate((*grad_cache)[static_cast<std::size_t>(axis)][static_cast<std::size_t>(k)], state);
            });
        return g;
    };
    evaluator.hess_diffusion = [grid, hess_cache, time_interp](double s, const VectorXd& state) {
        const int dim = grid->dim();
        MatrixXd h(dim, dim);
        for (int ia = 0; ia < dim; ++ia)
            for (int ib = ia; ib < dim; ++ib) {
                h(ia, ib) = time_interp(s, [&](int k) {
                    return grid->interpolate((*hess_cache)[static_cast<std::size_t>(ia * dim + ib)][static_cast<std::size_t>(k)], state);
                });
                h(ib, ia) = h(ia, ib);
            }
        return h;
    };
    return evaluator;
}

Estimate correction_term(const BlockSDE& model, int l, const TermEvaluator& prev_term, double tau,
                         const VectorXd& x, std::size_t paths, std::uint64_t seed,
                         const McOptions& options) {
    if (l < 1) throw std::invalid_argument("correction_term: l must be >= 1");
    if (!(tau > 0.0)) throw std::invalid_argument("correction_term: tau must be > 0");
    if (!prev_term.grad_diffusion || !prev_term.hess_diffusion)
        throw std::invalid_argument("correction_term: previous-term evaluator incomplete");
    Stopwatch watch;

    const Representation rep = make_representation(model, tau, x, options);
    const int J = rep.intervals;
    const int d = rep.d;
    const int nc = rep.nc;

    if (nc == 0) {
        Estimate zero;
        zero.paths = paths;
        zero.seed = seed;
        zero.wall_ms = watch.ms();
        return zero;
    }

    const DensityKernel kernel_tau = rep.kernels[0];
    const Proposal proposal = Proposal::from_kernel(kernel_tau, options.proposal_inflation);

    // Flow tables from the shifted complement bases used by the central
    // difference in the complement coordinates.
    std::vector<FlowData> shifted_plus(static_cast<std::size_t>(nc));
    std::vector<FlowData> shifted_minus(static_cast<std::size_t>(nc));
    std::vector<double> steps(static_cast<std::size_t>(nc));
    for (int i = 0; i < nc; ++i) {
        const double h = 1e-5 * (1.0 + std::abs(x[d + i]));
        steps[static_cast<std::size_t>(i)] = h;
        VectorXd xp = x, xm = x;
        xp[d + i] += h;
        xm[d + i] -= h;
        shifted_plus[static_cast<std::size_t>(i)] = flow_data(model, xp, tau, J, options.flow_max_step);
        shifted_minus[static_cast<std::size_t>(i)] = flow_data(model, xm, tau, J, options.flow_max_step);
    }

    // Transported parabolic source of the previous odd term:
    //   D(s_j, y; base) = ∫_0^{s_j} [ (1/2) a : Hess + mu^d . grad ](s_k, y, F^{s_j - s_k} base) ds_k.
    auto inner_integral = [&](int j, const VectorXd& yd, const FlowData& flows) {
        std::vector<double> vals(static_cast<std::size_t>(j) + 1, 0.0);
        for (int k = 0; k <= j; ++k) {
            VectorXd state(rep.n);
            state.head(d) = yd;
            state.tail(nc) = flows.points[static_cast<std::size_t>(j - k)];
            const MatrixXd a = model.diffusion_matrix(state);
            const VectorXd mu = model.drift_diffusion(state);
            const MatrixXd hess = prev_term.hess_diffusion(k * rep.dt, state);
            const VectorXd grad = prev_term.grad_diffusion(k * rep.dt, state);
            double s = 0.0;
            for (int ia = 0; ia < d; ++ia) {
                s += mu[ia] * grad[ia];
                for (int ib = 0; ib < d; ++ib) s += 0.5 * a(ia, ib) * hess(ia, ib);
            }
            vals[static_cast<std::size_t>(k)] = s;
        }
        return simpson_uniform(vals, rep.dt);
    };

    // Source of the correction: sum_i mu_{d+i}(y, x^c) d/dx^c_i D(s_j, y).
    auto correction_core = [&](int j, const VectorXd& yd) {
        const VectorXd b = model.drift(rep.full(yd));
        double acc = 0.0;
        for (int i = 0; i < nc; ++i) {
            const double dplus = inner_integral(j, yd, shifted_plus[static_cast<std::size_t>(i)]);
            const double dminus = inner_integral(j, yd, shifted_minus[static_cast<std::size_t>(i)]);
            acc += b[d + i] * (dplus - dminus) / (2.0 * steps[static_cast<std::size_t>(i)]);
        }
        return acc;
    };

    const double endpoint = correction_core(J, x.head(d));

    std::vector<double> values(paths, 0.0);
    parallel_for(
        paths,
        [&](std::size_t p) {
            PathRng rng(seed, p);
            const VectorXd zeta = proposal.sample(rng);
            std::vector<double> nodes(static_cast<std::size_t>(J) + 1, 0.0);
            for (int j = 1; j < J; ++j) {
                const double span = tau - j * rep.dt;
                nodes[static_cast<std::size_t>(j)] =
                    correction_core(j, zeta) *
                    weight(rep.kernels[static_cast<std::size_t>(j)], proposal, zeta) *
                    rep.pot_factor(zeta, span);
            }
            nodes[static_cast<std::size_t>(J)] = endpoint;
            const double v = simpson_uniform(nodes, rep.dt);
            if (!std::isfinite(v)) throw numerical_error("correction_term: non-finite path value");
            values[p] = v;
        },
        options.threads);

    return reduce_paths(values, seed, watch.ms());
}

namespace {

// Coefficient sensitivities frozen at x, for the analytic Gaussian score.
struct ScoreContext {
    int d = 0;
    int coord = 0;
    VectorXd mu_d;
    MatrixXd a;
    Eigen::LLT<MatrixXd> a_llt;
    VectorXd dmu;   // d mu^d / dx_coord
    MatrixXd da;    // d a / dx_coord
    double tr_ainv_da = 0.0;

    // d log N(zeta; x^d + span mu^d, span a) / dx_coord.
    double score(const VectorXd& zeta, const VectorXd& xd, double span) const {
        const VectorXd r = zeta - (xd + span * mu_d);
        const VectorXd q = a_llt.solve(r) / span;
        VectorXd dm = span * dmu;
        if (coord < d) dm[coord] += 1.0;
        double s = dm.dot(q);
        s += 0.5 * (span * q.dot(da * q) - tr_ainv_da);
        return s;
    }
};

ScoreContext make_score_context(const BlockSDE& model, const VectorXd& x, int coord) {
    ScoreContext ctx;
    ctx.d = model.d;
    ctx.coord = coord;
    ctx.mu_d = model.drift_diffusion(x);
    ctx.a = model.diffusion_matrix(x);
    ctx.a_llt.compute(ctx.a);
    if (ctx.a_llt.info() != Eigen::Success)
        throw numerical_error("delta estimator: diffusion block singular at x");
    const double h = 1e-5 * (1.0 + std::abs(x[coord]));
    VectorXd xp = x, xm = x;
    xp[coord] += h;
    xm[coord] -= h;
    ctx.dmu = (model.drift_diffusion(xp) - model.drift_diffusion(xm)) / (2.0 * h);
    ctx.da = (model.diffusion_matrix(xp) - model.diffusion_matrix(xm)) / (2.0 * h);
    ctx.tr_ainv_da = ctx.a_llt.solve(ctx.da).trace();
    return ctx;
}

}  // namespace

Estimate delta_naive(const BlockSDE& model, const Payoff& payoff, double tau, const VectorXd& x,
                     int coord, std::size_t paths, std::uint64_t seed, const McOptions& options) {
    if (!(tau > 0.0)) throw std::invalid_argument("delta_naive: tau must be > 0");
    if (coord < 0 || coord >= model.n) throw std::invalid_argument("delta_naive: coordinate out of range");
    require_assumptions(model, payoff, options);
    Stopwatch watch;

    const Representation rep = make_representation(model, tau, x, options);
    const int J = rep.intervals;
    const int d = rep.d;
    const bool complement_coord = coord >= d;

    // Time-homogeneous proposal: reference-horizon kernel, inflated. Tied to
    // a fixed reference time so it does not shrink with tau.
    const DensityKernel ref_kernel =
        make_kernel(x.head(d) + options.reference_time * rep.mu_d, options.reference_time * rep.a,
                    options.reference_time);
    const Proposal proposal = Proposal::from_kernel(ref_kernel, options.proposal_inflation);

    const ScoreContext score = make_score_context(model, x, coord);

    // Potential sensitivity at the base point.
    double dpot_x = 0.0;
    if (rep.has_pot) {
        const double h = 1e-5 * (1.0 + std::abs(x[coord]));
        VectorXd xp = x, xm = x;
        xp[coord] += h;
        xm[coord] -= h;
        dpot_x = (model.potential_at(xp) - model.potential_at(xm)) / (2.0 * h);
    }

    // Representations at x +/- h e_coord carry the source-core dependence on
    // the coordinate (flow parameters and complement base point).
    const double hc = 1e-5 * (1.0 + std::abs(x[coord]));
    VectorXd xp = x, xm = x;
    xp[coord] += hc;
    xm[coord] -= hc;
    std::unique_ptr<Representation> rep_plus, rep_minus;
    if (rep.nc > 0) {
        rep_plus = std::make_unique<Representation>(make_representation(model, tau, xp, options));
        rep_minus = std::make_unique<Representation>(make_representation(model, tau, xm, options));
    }

    // Endpoint of the Duhamel integral and its coordinate derivative.
    double endpoint_delta = 0.0;
    if (rep.nc > 0) {
        const double ep = rep_plus->source_core(payoff, xp.head(d), J);
        const double em = rep_minus->source_core(payoff, xm.head(d), J);
        endpoint_delta = (ep - em) / (2.0 * hc);
    }

    std::vector<double> values(paths, 0.0);
    parallel_for(
        paths,
        [&](std::size_t p) {
            PathRng rng(seed, p);
            const VectorXd zeta = proposal.sample(rng);
            const double w0 = weight(rep.kernels[0], proposal, zeta);
            const double potf0 = rep.pot_factor(zeta, tau);
            const double f0 = payoff.f(rep.full(zeta));

            double pot_score0 = 0.0;
            if (rep.has_pot) {
                pot_score0 = 0.5 * tau * dpot_x;
                if (complement_coord) {
                    VectorXd zp = rep.full(zeta), zm = rep.full(zeta);
                    zp[coord] += hc;
                    zm[coord] -= hc;
                    pot_score0 += 0.5 * tau *
                                  (model.potential_at(zp) - model.potential_at(zm)) / (2.0 * hc);
                }
            }

            double v = f0 * w0 * potf0 * (score.score(zeta, x.head(d), tau) + pot_score0);
            if (complement_coord) {
                const VectorXd grad = payoff.complement_gradient_at(rep.full(zeta), d);
                v += grad[coord - d] * w0 * potf0;
            }

            if (rep.nc > 0) {
                std::vector<double> nodes(static_cast<std::size_t>(J) + 1, 0.0);
                for (int j = 0; j < J; ++j) {
                    const double span = tau - j * rep.dt;
                    const double wj = weight(rep.kernels[static_cast<std::size_t>(j)], proposal, zeta);
                    const double potj = rep.pot_factor(zeta, span);
                    const double core = rep.source_core(payoff, zeta, j);
                    const double core_p = rep_plus->source_core(payoff, zeta, j);
                    const double core_m = rep_minus->source_core(payoff, zeta, j);
                    double node = core * wj * potj * score.score(zeta, x.head(d), span);
                    node += (core_p - core_m) / (2.0 * hc) * wj * potj;
                    if (rep.has_pot) node += core * wj * potj * 0.5 * span * dpot_x;
                    nodes[static_cast<std::size_t>(j)] = node;
                }
                nodes[static_cast<std::size_t>(J)] = endpoint_delta;
                v += simpson_uniform(nodes, rep.dt);
            }
            if (!std::isfinite(v)) throw numerical_error("delta_naive: non-finite path value");
            values[p] = v;
        },
        options.threads);

    return reduce_paths(values, seed, watch.ms());
}

ControlFunction ControlFunction::standard(const BlockSDE& model) {
    const BlockSDE m = model;
    ControlFunction control;
    control.g = [m](double t, const VectorXd& xd, const VectorXd& xi) {
        VectorXd full = VectorXd::Zero(m.n);
        full.head(m.d) = xd;
        const MatrixXd a = m.diffusion_matrix(full);
        const Eigen::LLT<MatrixXd> llt(a);
        if (llt.info() != Eigen::Success)
            throw numerical_error("control function: diffusion block singular");
        return VectorXd(xd + std::sqrt(t) * (MatrixXd(llt.matrixL()) * xi));
    };
    control.jacobian_xi = [m](double t, const VectorXd& xd, const VectorXd&) {
        VectorXd full = VectorXd::Zero(m.n);
        full.head(m.d) = xd;
        const MatrixXd a = m.diffusion_matrix(full);
        const Eigen::LLT<MatrixXd> llt(a);
        if (llt.info() != Eigen::Success)
            throw numerical_error("control function: diffusion block singular");
        return MatrixXd(std::sqrt(t) * MatrixXd(llt.matrixL()));
    };
    return control;
}

Estimate delta_controlled(const BlockSDE& model, const Payoff& payoff,
                          const ControlFunction& control, double tau, const VectorXd& x, int coord,
                          std::size_t paths, std::uint64_t seed, const McOptions& options) {
    if (!(tau > 0.0)) throw std::invalid_argument("delta_controlled: tau must be > 0");
    if (coord < 0 || coord >= model.n)
        throw std::invalid_argument("delta_controlled: coordinate out of range");
    if (!control.g || !control.jacobian_xi)
        throw std::invalid_argument("delta_controlled: control function incomplete");
    require_assumptions(model, payoff, options);
    Stopwatch watch;

    // Common-base-draw differentiation through g: the whole per-path value is
    // evaluated at x +/- h e_coord with the same xi. The sample point moves
    // with x, which keeps the variance bounded as tau drops.
    const double h = 1e-5 * (1.0 + std::abs(x[coord]));
    VectorXd xp = x, xm = x;
    xp[coord] += h;
    xm[coord] -= h;

    const Representation rep_p = make_representation(model, tau, xp, options);
    const Representation rep_m = make_representation(model, tau, xm, options);
    const int J = rep_p.intervals;
    const int d = rep_p.d;

    auto endpoint_of = [&](const Representation& rep, const VectorXd& base) {
        return rep.nc > 0 ? rep.source_core(payoff, base.head(d), J) : 0.0;
    };
    const double endpoint_p = endpoint_of(rep_p, xp);
    const double endpoint_m = endpoint_of(rep_m, xm);

    auto path_value = [&](const Representation& rep, const VectorXd& base, double endpoint,
                          const VectorXd& xi) {
        const VectorXd zeta = control.g(tau, base.head(d), xi);
        const MatrixXd jac = control.jacobian_xi(tau, base.head(d), xi);
        const double det = jac.determinant();
        if (!(std::abs(det) > 1e-300))
            throw numerical_error("delta_controlled: singular control Jacobian at a draw");
        const double log_phi = standard_normal_log_density(xi) - std::log(std::abs(det));
        const double p = kernel_density(rep.kernels[0], zeta);
        const double w = p / std::exp(log_phi);
        double v = payoff.f(rep.full(zeta)) * w * rep.pot_factor(zeta, tau);
        if (rep.nc > 0) {
            std::vector<double> nodes(static_cast<std::size_t>(J) + 1, 0.0);
            for (int j = 0; j < J; ++j) {
                const double span = tau - j * rep.dt;
                const double pj = kernel_density(rep.kernels[static_cast<std::size_t>(j)], zeta);
                nodes[static_cast<std::size_t>(j)] = rep.source_core(payoff, zeta, j) *
                                                     (pj / std::exp(log_phi)) *
                                                     rep.pot_factor(zeta, span);
            }
            nodes[static_cast<std::size_t>(J)] = endpoint;
            v += simpson_uniform(nodes, rep.dt);
        }
        return v;
    };

    std::vector<double> values(paths, 0.0);
    parallel_for(
        paths,
        [&](std::size_t p) {
            PathRng rng(seed, p);
            VectorXd xi(d);
            for (int i = 0; i < d; ++i) xi[i] = rng.normal();
            const double vp = path_value(rep_p, xp, endpoint_p, xi);
            const double vm = path_value(rep_m, xm, endpoint_m, xi);
            const double v = (vp - vm) / (2.0 * h);
            if (!std::isfinite(v)) throw numerical_error("delta_controlled: non-finite path value");
            values[p] = v;
        },
        options.threads);

    return reduce_paths(values, seed, watch.ms());
}

}  // namespace sedi
