#include "sedi/diffusion.hpp"

#include <cmath>

#include "sedi/errors.hpp"
#include "sedi/quadrature.hpp"

namespace sedi {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Cholesky with a singularity check; the kernel covariance must be positive
// definite on the diffusion subspace.
MatrixXd chol_or_throw(const MatrixXd& cov) {
    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw numerical_error(
            "gaussian_kernel: diffusion block singular (degenerate point the leading-order "
            "kernel cannot handle)");
    MatrixXd lower = llt.matrixL();
    for (int i = 0; i < lower.rows(); ++i)
        if (!(lower(i, i) > 0.0) || !std::isfinite(lower(i, i)))
            throw numerical_error("gaussian_kernel: diffusion block singular or non-finite");
    return lower;
}

double gaussian_log_norm(const MatrixXd& chol_lower) {
    double log_det_half = 0.0;
    for (int i = 0; i < chol_lower.rows(); ++i) log_det_half += std::log(chol_lower(i, i));
    return -0.5 * chol_lower.rows() * kLog2Pi - log_det_half;
}

double gaussian_log_density(const VectorXd& mean, const MatrixXd& chol_lower, double log_norm,
                            const VectorXd& y) {
    const VectorXd z = chol_lower.triangularView<Eigen::Lower>().solve(y - mean);
    return log_norm - 0.5 * z.squaredNorm();
}

}  // namespace

DensityKernel make_kernel(const VectorXd& mean, const MatrixXd& covariance, double t) {
    DensityKernel kernel;
    kernel.mean = mean;
    kernel.covariance = covariance;
    kernel.t = t;
    kernel.chol_lower = chol_or_throw(covariance);
    kernel.log_norm = gaussian_log_norm(kernel.chol_lower);
    return kernel;
}

DensityKernel gaussian_kernel(const BlockSDE& model, const VectorXd& x, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("gaussian_kernel: t must be > 0");
    const VectorXd mean = x.head(model.d) + t * model.drift_diffusion(x);
    const MatrixXd cov = t * model.diffusion_matrix(x);
    return make_kernel(mean, cov, t);
}

double kernel_density(const DensityKernel& kernel, const VectorXd& y) {
    return std::exp(gaussian_log_density(kernel.mean, kernel.chol_lower, kernel.log_norm, y));
}

double Proposal::density(const VectorXd& y) const {
    return std::exp(gaussian_log_density(mean, chol_lower, log_norm, y));
}

VectorXd Proposal::sample(PathRng& rng) const {
    VectorXd z(mean.size());
    for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return mean + chol_lower * z;
}

Proposal Proposal::from_kernel(const DensityKernel& kernel, double inflation) {
    return gaussian(kernel.mean, inflation * kernel.covariance);
}

Proposal Proposal::gaussian(const VectorXd& mean, const MatrixXd& covariance) {
    Proposal proposal;
    proposal.mean = mean;
    proposal.covariance = covariance;
    proposal.chol_lower = chol_or_throw(covariance);
    proposal.log_norm = gaussian_log_norm(proposal.chol_lower);
    return proposal;
}

double weight(const DensityKernel& target, const Proposal& proposal, const VectorXd& zeta) {
    const double phi = proposal.density(zeta);
    if (!(phi > 0.0)) throw numerical_error("weight: proposal density vanishes at the draw");
    return kernel_density(target, zeta) / phi;
}

double solve_diffusion_step(const BlockSDE& model,
                            const std::function<double(const VectorXd&)>& data,
                            const std::function<double(double, const VectorXd&)>& source,
                            double tau, const VectorXd& x, const DiffusionStepOptions& options) {
    if (!(tau > 0.0)) throw std::invalid_argument("solve_diffusion_step: tau must be > 0");
    const int d = model.d;
    const int n = model.n;
    const VectorXd xd = x.head(d);
    const VectorXd mu = model.drift_diffusion(x);
    const MatrixXd a = model.diffusion_matrix(x);
    const MatrixXd chol_a = chol_or_throw(a);
    const double pot_x = model.potential_at(x);

    auto full_state = [&](const VectorXd& y) {
        VectorXd full(n);
        full.head(d) = y;
        full.tail(n - d) = x.tail(n - d);
        return full;
    };
    // Symmetrized frozen potential factor over an elapsed span.
    auto pot_factor = [&](const VectorXd& y, double span) {
        if (!model.has_potential()) return 1.0;
        return std::exp(0.5 * span * (pot_x + model.potential_at(full_state(y))));
    };

    // Expectation of fn against the frozen kernel over elapsed `span`.
    auto kernel_expect = [&](const std::function<double(const VectorXd&)>& fn, double span) {
        const VectorXd mean = xd + span * mu;
        const MatrixXd chol_span = std::sqrt(span) * chol_a;
        if (d <= 3) {
            const GaussHermiteRule& rule = gauss_hermite(options.quadrature_order);
            return gauss_hermite_expect(rule, mean, chol_span, fn);
        }
        // Weighted sampling, one proposal per elapsed span.
        const DensityKernel kernel = make_kernel(mean, span * a, span);
        const Proposal proposal = Proposal::from_kernel(kernel, options.proposal_inflation);
        double acc = 0.0;
        for (int p = 0; p < options.mc_paths; ++p) {
            PathRng rng(options.seed, static_cast<std::uint64_t>(p));
            const VectorXd zeta = proposal.sample(rng);
            const double value = fn(zeta);
            if (!std::isfinite(value))
                throw numerical_error("solve_diffusion_step: non-finite data at a sample");
            acc += value * weight(kernel, proposal, zeta);
        }
        return acc / options.mc_paths;
    };

    double result = 0.0;
    if (data) {
        result = kernel_expect(
            [&](const VectorXd& y) {
                const double v = data(y);
                if (!std::isfinite(v)) throw numerical_error("solve_diffusion_step: non-finite data on a node");
                return v * pot_factor(y, tau);
            },
            tau);
    }

    if (source) {
        const int intervals = options.time_intervals;
        std::vector<double> slice(static_cast<std::size_t>(intervals) + 1);
        for (int j = 0; j <= intervals; ++j) {
            const double s = tau * j / intervals;
            const double span = tau - s;
            if (j == intervals) {
                // Collapsed kernel: the spatial integral degenerates to the base point.
                slice[static_cast<std::size_t>(j)] = source(s, xd);
            } else {
                slice[static_cast<std::size_t>(j)] = kernel_expect(
                    [&](const VectorXd& y) { return source(s, y) * pot_factor(y, span); }, span);
            }
        }
        result += simpson_uniform(slice, tau / intervals);
    }
    return result;
}

}  // namespace sedi
