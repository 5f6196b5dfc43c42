#include "sedi/payoffs.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "sedi/errors.hpp"

namespace sedi {

std::string Payoff::AssumptionReport::describe() const {
    std::ostringstream os;
    os << "(i) local integrability: " << (local_integrability ? "pass" : "VIOLATED") << "; "
       << "(ii) complement smoothness: " << (complement_smooth ? "pass" : "VIOLATED") << "; "
       << "(iii) growth bound: " << (growth_bound ? "pass" : "VIOLATED");
    return os.str();
}

Payoff::AssumptionReport Payoff::check_assumptions(const BlockSDE& model, double box_half_width,
                                                   int samples, unsigned seed) const {
    AssumptionReport report;
    report.complement_smooth = smooth_complement;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-box_half_width, box_half_width);
    bool finite = true;
    bool growth = true;
    for (int s = 0; s < samples; ++s) {
        VectorXd x(model.n);
        for (int i = 0; i < model.n; ++i) x[i] = unif(rng);
        const double v = f(x);
        if (!std::isfinite(v)) finite = false;
        if (!(std::abs(v) <= growth_C * std::exp(growth_C * x.norm()) + 1e-12)) growth = false;
    }
    report.local_integrability = finite;
    report.growth_bound = growth;
    return report;
}

VectorXd Payoff::complement_gradient_at(const VectorXd& x, int d) const {
    if (gradient_complement) return gradient_complement(x);
    const int n = static_cast<int>(x.size());
    VectorXd grad(n - d);
    VectorXd xp = x, xm = x;
    for (int i = d; i < n; ++i) {
        const double h = 1e-6 * (1.0 + std::abs(x[i]));
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        grad[i - d] = (f(xp) - f(xm)) / (2.0 * h);
        xp[i] = x[i];
        xm[i] = x[i];
    }
    return grad;
}

namespace {

// Direction of the kink surface {L_i = L_j} expressed in state coordinates.
// The payoff is smooth in the complement coordinates exactly when the kink
// normal has no component there.
bool kink_in_diffusion_subspace(const BlockSDE& model, int i, int j) {
    VectorXd diff = VectorXd::Zero(model.n);
    diff[i] = 1.0;
    diff[j] = -1.0;
    VectorXd normal = diff;
    if (model.rate_map) normal = model.rate_map->to_log.transpose() * diff;
    return normal.tail(model.n - model.d).lpNorm<Eigen::Infinity>() <= 1e-10 * std::max(1.0, normal.norm());
}

void check_indices(const BlockSDE& model, int i, int j) {
    if (i < 0 || j < 0 || i >= model.n || j >= model.n || i == j)
        throw std::invalid_argument("spread payoff: rate indices out of range");
}

double rate_growth_constant(const BlockSDE& model) {
    double c = 1.0;
    if (model.rate_map) {
        for (int r = 0; r < model.rate_map->to_log.rows(); ++r)
            c = std::max(c, model.rate_map->to_log.row(r).lpNorm<1>());
    }
    return c;
}

}  // namespace

Payoff spread_option(const BlockSDE& model, int i, int j) {
    check_indices(model, i, j);
    Payoff payoff;
    payoff.kind = "spread_option";
    payoff.growth_C = rate_growth_constant(model);
    payoff.smooth_complement = kink_in_diffusion_subspace(model, i, j);
    const BlockSDE m = model;  // capture coordinate map by value
    payoff.f = [m, i, j](const VectorXd& x) {
        const VectorXd rates = m.rates(x);
        return std::max(rates[i] - rates[j], 0.0);
    };
    const int d = model.d;
    payoff.gradient_complement = [m, i, j, d](const VectorXd& x) {
        const VectorXd rates = m.rates(x);
        const double slope = rates[i] > rates[j] ? 1.0 : 0.0;
        VectorXd grad = VectorXd::Zero(m.n - d);
        for (int k = d; k < m.n; ++k) {
            double dk = 0.0;
            if (m.rate_map) {
                dk = rates[i] * m.rate_map->to_log(i, k) - rates[j] * m.rate_map->to_log(j, k);
            } else {
                dk = (k == i ? 1.0 : 0.0) - (k == j ? 1.0 : 0.0);
            }
            grad[k - d] = slope * dk;
        }
        return grad;
    };
    return payoff;
}

Payoff linear_spread(const BlockSDE& model, int i, int j, double c) {
    check_indices(model, i, j);
    Payoff payoff;
    payoff.kind = "linear_spread";
    payoff.growth_C = std::max(rate_growth_constant(model), std::abs(c));
    payoff.smooth_complement = true;
    const BlockSDE m = model;
    payoff.f = [m, i, j, c](const VectorXd& x) {
        const VectorXd rates = m.rates(x);
        return c * (rates[i] - rates[j]);
    };
    const int d = model.d;
    payoff.gradient_complement = [m, i, j, c, d](const VectorXd& x) {
        const VectorXd rates = m.rates(x);
        VectorXd grad = VectorXd::Zero(m.n - d);
        for (int k = d; k < m.n; ++k) {
            double dk = 0.0;
            if (m.rate_map) {
                dk = rates[i] * m.rate_map->to_log(i, k) - rates[j] * m.rate_map->to_log(j, k);
            } else {
                dk = (k == i ? 1.0 : 0.0) - (k == j ? 1.0 : 0.0);
            }
            grad[k - d] = c * dk;
        }
        return grad;
    };
    return payoff;
}

void validate_payoff(const Payoff& payoff, int n, double box_half_width, int samples,
                     unsigned seed) {
    if (!payoff.f) throw std::invalid_argument("payoff: f must be set");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-box_half_width, box_half_width);
    for (int s = 0; s < samples; ++s) {
        VectorXd x(n);
        for (int i = 0; i < n; ++i) x[i] = unif(rng);
        const double v = payoff.f(x);
        if (!std::isfinite(v)) throw std::invalid_argument("payoff: non-finite value on sample grid");
        if (!(std::abs(v) <= payoff.growth_C * std::exp(payoff.growth_C * x.norm()) + 1e-12))
            throw std::invalid_argument("payoff: sampled growth bound |f| <= C exp(C|x|) violated");
    }
}

double TransformedProblem::decay(const VectorXd& x) const {
    return std::sqrt(a + q * x.squaredNorm());
}

double TransformedProblem::read_back(const VectorXd& x, double transformed) const {
    return std::exp(decay(x)) * transformed;
}

TransformedProblem exp_transform(const BlockSDE& model, const Payoff& payoff, double a, double q) {
    if (!(a > 0.0)) throw std::invalid_argument("exp_transform: a must be > 0");
    if (q == 0.0) q = 2.0 * std::max(payoff.growth_C * payoff.growth_C, 1.0);
    if (!(q > payoff.growth_C * payoff.growth_C))
        throw std::invalid_argument("exp_transform: requires q > growth_C^2");

    const BlockSDE base = model;
    const int n = model.n;
    const int d = model.d;

    auto decay_fn = [a, q](const VectorXd& x) { return std::sqrt(a + q * x.squaredNorm()); };
    auto grad_decay = [a, q, decay_fn](const VectorXd& x) {
        return VectorXd(q * x / decay_fn(x));
    };

    TransformedProblem problem;
    problem.a = a;
    problem.q = q;
    problem.model = model;
    problem.model.kind = model.kind + "+exp_transform";

    // u = exp(d) u~ turns the generator into one with drift b + sigma sigma^T grad d
    // and potential b.grad d + (1/2) tr(sigma sigma^T D^2 d) + (1/2) |sigma^T grad d|^2.
    problem.model.drift = [base, grad_decay, d](const VectorXd& x) {
        VectorXd b = base.drift(x);
        const MatrixXd add = base.diffusion_matrix(x);
        b.head(d) += add * grad_decay(x).head(d);
        return b;
    };
    const ScalarFieldFn prior_potential = model.potential;
    problem.model.potential = [base, grad_decay, decay_fn, prior_potential, a, q, d, n](const VectorXd& x) {
        const VectorXd gd = grad_decay(x);
        const double dv = decay_fn(x);
        // Hessian of d: (q/d) I - q^2 x x^T / d^3, needed only on the diffusion block.
        const MatrixXd add = base.diffusion_matrix(x);
        double tr = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                const double hess_ij = (i == j ? q / dv : 0.0) - q * q * x[i] * x[j] / (dv * dv * dv);
                tr += add(i, j) * hess_ij;
            }
        const VectorXd gdd = gd.head(d);
        double c = base.drift(x).dot(gd) + 0.5 * tr + 0.5 * gdd.dot(add * gdd);
        if (prior_potential) c += prior_potential(x);
        return c;
    };

    problem.payoff = payoff;
    problem.payoff.kind = payoff.kind + "+exp_transform";
    const ScalarFieldFn f = payoff.f;
    problem.payoff.f = [f, decay_fn](const VectorXd& x) { return std::exp(-decay_fn(x)) * f(x); };
    if (payoff.gradient_complement) {
        const auto grad = payoff.gradient_complement;
        problem.payoff.gradient_complement = [f, grad, grad_decay, decay_fn, d](const VectorXd& x) {
            const double damp = std::exp(-decay_fn(x));
            return VectorXd(damp * (grad(x) - f(x) * grad_decay(x).tail(x.size() - d)));
        };
    } else {
        problem.payoff.gradient_complement = nullptr;
    }

    // Boundedness of the transformed payoff on an expanding grid; also sets a
    // growth constant compatible with the decayed data.
    std::vector<VectorXd> directions;
    for (int axis = 0; axis < n; ++axis) {
        VectorXd e = VectorXd::Zero(n);
        e[axis] = 1.0;
        directions.push_back(e);
        directions.push_back(-e);
    }
    std::mt19937_64 rng(405u);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int k = 0; k < 8; ++k) {
        VectorXd v(n);
        for (int i = 0; i < n; ++i) v[i] = gauss(rng);
        directions.push_back(v.normalized());
    }
    double sup = 0.0;
    for (int ring = 0; ring <= 25; ++ring) {
        const double radius = 2.0 * ring;
        for (const auto& dir : directions) {
            const double v = std::abs(problem.payoff.f(radius * dir));
            if (!std::isfinite(v)) throw numerical_error("exp_transform: transformed payoff not bounded");
            sup = std::max(sup, v);
        }
    }
    problem.payoff.growth_C = std::max(1.0, sup);
    return problem;
}

}  // namespace sedi
