#include <doctest.h>

#include <cmath>

#include "sedi/quadrature.hpp"

using namespace sedi;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("gauss_hermite low orders match closed forms") {
    const GaussHermiteRule& one = gauss_hermite(1);
    CHECK(one.nodes[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(one.weights[0] == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-14));

    // ∫ z^2 e^{-z^2} dz = sqrt(pi) / 2
    const GaussHermiteRule& rule = gauss_hermite(8);
    double acc = 0.0;
    for (int k = 0; k < rule.order(); ++k) acc += rule.weights[k] * rule.nodes[k] * rule.nodes[k];
    CHECK(acc == doctest::Approx(std::sqrt(M_PI) / 2.0).epsilon(1e-12));
}

TEST_CASE("gauss_hermite_expect reproduces normal moments") {
    const GaussHermiteRule& rule = gauss_hermite(20);
    VectorXd mean(1);
    mean << 0.5;
    MatrixXd chol(1, 1);
    chol << 2.0;  // variance 4

    const double m2 = gauss_hermite_expect(rule, mean, chol, [](const VectorXd& y) { return y[0] * y[0]; });
    CHECK(m2 == doctest::Approx(4.0 + 0.25).epsilon(1e-12));
    const double m4 = gauss_hermite_expect(rule, mean, chol, [](const VectorXd& y) {
        const double c = y[0] - 0.5;
        return c * c * c * c;
    });
    CHECK(m4 == doctest::Approx(3.0 * 16.0).epsilon(1e-12));
}

TEST_CASE("gauss_hermite_expect handles correlated pairs") {
    const GaussHermiteRule& rule = gauss_hermite(16);
    VectorXd mean = VectorXd::Zero(2);
    MatrixXd cov(2, 2);
    cov << 1.0, 0.6, 0.6, 2.0;
    const MatrixXd chol = Eigen::LLT<MatrixXd>(cov).matrixL();
    const double e = gauss_hermite_expect(rule, mean, chol,
                                          [](const VectorXd& y) { return (y[0] + y[1]) * (y[0] + y[1]); });
    CHECK(e == doctest::Approx(1.0 + 2.0 + 2.0 * 0.6).epsilon(1e-12));
}

TEST_CASE("simpson is exact for cubics") {
    const int n = 8;
    const double dt = 0.25;
    std::vector<double> values(n + 1);
    for (int k = 0; k <= n; ++k) {
        const double s = k * dt;
        values[static_cast<std::size_t>(k)] = s * s * s - 2.0 * s + 1.0;
    }
    const double T = n * dt;
    const double exact = T * T * T * T / 4.0 - T * T + T;
    CHECK(simpson_uniform(values, dt) == doctest::Approx(exact).epsilon(1e-14));
}

TEST_CASE("cumulative simpson prefixes are exact for quadratics") {
    const int n = 7;  // odd interval count exercises the tail segment
    const double dt = 0.1;
    std::vector<double> values(n + 1);
    for (int k = 0; k <= n; ++k) {
        const double s = k * dt;
        values[static_cast<std::size_t>(k)] = 3.0 * s * s + s;
    }
    const std::vector<double> prefix = cumulative_simpson(values, dt);
    for (int j = 0; j <= n; ++j) {
        const double s = j * dt;
        CHECK(prefix[static_cast<std::size_t>(j)] == doctest::Approx(s * s * s + 0.5 * s * s).epsilon(1e-13));
    }
}
