#include "sedi/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include "sedi/errors.hpp"

namespace sedi {

namespace {

GaussHermiteRule build_gauss_hermite(int order) {
    if (order < 1) throw std::invalid_argument("gauss_hermite: order must be >= 1");
    // Jacobi matrix of the (physicists') Hermite recurrence; eigenvalues are
    // the nodes, weights come from the first eigenvector components.
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
    for (int k = 1; k < order; ++k) {
        const double b = std::sqrt(0.5 * k);
        jacobi(k, k - 1) = b;
        jacobi(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    GaussHermiteRule rule;
    rule.nodes = eig.eigenvalues();
    rule.weights.resize(order);
    const double mu0 = std::sqrt(M_PI);  // ∫ exp(-z^2) dz
    for (int k = 0; k < order; ++k) {
        const double v = eig.eigenvectors()(0, k);
        rule.weights[k] = mu0 * v * v;
    }
    return rule;
}

}  // namespace

const GaussHermiteRule& gauss_hermite(int order) {
    static std::map<int, GaussHermiteRule> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, build_gauss_hermite(order)).first;
    return it->second;
}

double gauss_hermite_expect(const GaussHermiteRule& rule, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& chol_lower,
                            const std::function<double(const Eigen::VectorXd&)>& f) {
    const int dim = static_cast<int>(mean.size());
    const int q = rule.order();
    const double norm = std::pow(M_PI, -0.5 * dim);
    const double sqrt2 = std::sqrt(2.0);

    std::vector<int> idx(static_cast<std::size_t>(dim), 0);
    Eigen::VectorXd z(dim);
    double acc = 0.0;
    for (;;) {
        double w = 1.0;
        for (int k = 0; k < dim; ++k) {
            z[k] = rule.nodes[idx[static_cast<std::size_t>(k)]];
            w *= rule.weights[idx[static_cast<std::size_t>(k)]];
        }
        const Eigen::VectorXd y = mean + sqrt2 * (chol_lower * z);
        const double fy = f(y);
        if (!std::isfinite(fy)) throw numerical_error("gauss_hermite_expect: non-finite integrand value");
        acc += w * fy;

        int k = 0;
        for (; k < dim; ++k) {
            if (++idx[static_cast<std::size_t>(k)] < q) break;
            idx[static_cast<std::size_t>(k)] = 0;
        }
        if (k == dim) break;
    }
    return norm * acc;
}

std::vector<double> cumulative_simpson(const std::vector<double>& values, double dt) {
    const std::size_t n = values.size();
    std::vector<double> prefix(n, 0.0);
    if (n < 2) return prefix;
    if (n == 2) {
        prefix[1] = 0.5 * dt * (values[0] + values[1]);
        return prefix;
    }
    // Parabola through each node triple; exact prefix integrals of the fit.
    for (std::size_t j = 1; j < n; ++j) {
        double seg;
        if (j % 2 == 1) {
            if (j + 1 < n) {
                seg = dt * (5.0 * values[j - 1] + 8.0 * values[j] - values[j + 1]) / 12.0;
            } else {
                seg = dt * (-values[j - 2] + 8.0 * values[j - 1] + 5.0 * values[j]) / 12.0;
            }
        } else {
            seg = dt * (-values[j - 2] + 8.0 * values[j - 1] + 5.0 * values[j]) / 12.0;
        }
        prefix[j] = prefix[j - 1] + seg;
    }
    return prefix;
}

double simpson_uniform(const std::vector<double>& values, double dt) {
    if (values.size() < 2) return 0.0;
    return cumulative_simpson(values, dt).back();
}

}  // namespace sedi
