#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace sedi {

/// Nodes and weights for ∫ f(z) exp(-z^2) dz (physicists' convention).
struct GaussHermiteRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
    int order() const { return static_cast<int>(nodes.size()); }
};

/// Golub-Welsch rule of the given order. Cached per order.
const GaussHermiteRule& gauss_hermite(int order);

/// E[f(Y)] for Y ~ N(mean, L L^T), tensorized over the dimensions of mean.
double gauss_hermite_expect(const GaussHermiteRule& rule, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& chol_lower,
                            const std::function<double(const Eigen::VectorXd&)>& f);

/// Integral over [0, (values.size()-1) * dt] on a uniform grid; pairwise
/// parabolic segments (composite Simpson for an even interval count).
double simpson_uniform(const std::vector<double>& values, double dt);

/// Prefix integrals I_j = ∫_0^{j dt}, same parabolic segments, I_0 = 0.
std::vector<double> cumulative_simpson(const std::vector<double>& values, double dt);

}  // namespace sedi
