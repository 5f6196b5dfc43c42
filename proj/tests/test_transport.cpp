#include <doctest.h>

#include <cmath>

#include "sedi/errors.hpp"
#include "sedi/models.hpp"
#include "sedi/transport.hpp"

using namespace sedi;
using Eigen::VectorXd;

namespace {

VectorXd v1(double a) {
    VectorXd x(1);
    x << a;
    return x;
}

}  // namespace

TEST_CASE("flow of a constant field is a straight characteristic") {
    auto field = [](const VectorXd& y) { return VectorXd::Constant(y.size(), 2.5); };
    const VectorXd out = flow(field, v1(1.0), 0.8);
    CHECK(out[0] == doctest::Approx(1.0 + 2.5 * 0.8).epsilon(1e-12));
}

TEST_CASE("flow of the linear field matches the exponential") {
    auto field = [](const VectorXd& y) { return VectorXd(-y); };
    const VectorXd out = flow(field, v1(1.0), 1.0);
    CHECK(std::abs(out[0] - std::exp(-1.0)) < 1e-8);
}

TEST_CASE("flow at t = 0 is the identity") {
    auto field = [](const VectorXd& y) { return VectorXd(y.array().sin().matrix()); };
    const VectorXd out = flow(field, v1(0.7), 0.0);
    CHECK(out[0] == 0.7);
}

TEST_CASE("negative times integrate the reversed field") {
    auto field = [](const VectorXd& y) { return VectorXd(-y); };
    const VectorXd fwd = flow(field, v1(1.0), 0.5);
    const VectorXd back = flow(field, fwd, -0.5);
    CHECK(back[0] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("flow blow-up is reported") {
    auto field = [](const VectorXd& y) { return VectorXd(y.array().square().matrix() * 1e8); };
    CHECK_THROWS_AS(flow(field, v1(1.0), 1.0), numerical_error);
}

TEST_CASE("solve_transport homogeneous case is f along the flow") {
    auto field = [](const VectorXd& y) { return VectorXd(-y); };
    auto f = [](const VectorXd& y) { return y[0] * y[0]; };
    const double got = solve_transport(field, f, nullptr, 1.0, v1(2.0));
    CHECK(got == doctest::Approx(4.0 * std::exp(-2.0)).epsilon(1e-8));
}

TEST_CASE("solve_transport constant source accumulates t") {
    auto field = [](const VectorXd& y) { return VectorXd::Zero(y.size()); };
    auto f = [](const VectorXd&) { return 0.0; };
    auto g = [](double, const VectorXd&) { return 1.0; };
    CHECK(solve_transport(field, f, g, 0.75, v1(0.0)) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("solve_transport matches the analytic Duhamel value") {
    // field = 1, f = 0, g(s, y) = y: integral of x0 + (t - s) over [0, t].
    auto field = [](const VectorXd& y) { return VectorXd::Constant(y.size(), 1.0); };
    auto f = [](const VectorXd&) { return 0.0; };
    auto g = [](double, const VectorXd& y) { return y[0]; };
    const double x0 = 0.3;
    const double t = 1.0;
    const double got = solve_transport(field, f, g, t, v1(x0));
    CHECK(std::abs(got - (x0 * t + t * t / 2.0)) < 1e-8);
}

TEST_CASE("group law F^{t+s} = F^t F^s within integrator tolerance") {
    auto field = [](const VectorXd& y) {
        VectorXd out(2);
        out[0] = std::sin(y[1]);
        out[1] = std::cos(y[0]) - 0.5 * y[1];
        return out;
    };
    VectorXd x(2);
    x << 0.4, -0.2;
    const double t = 0.6, s = 0.9;
    const VectorXd direct = flow(field, x, t + s);
    const VectorXd chained = flow(field, flow(field, x, s), t);
    CHECK((direct - chained).norm() <= 1e-8 * (1.0 + x.norm()));
}

TEST_CASE("solve_transport is linear in the data and source") {
    auto field = [](const VectorXd& y) { return VectorXd(0.5 * y); };
    auto f1 = [](const VectorXd& y) { return std::sin(y[0]); };
    auto f2 = [](const VectorXd& y) { return y[0] * y[0]; };
    auto g1 = [](double s, const VectorXd& y) { return s + y[0]; };
    auto g2 = [](double s, const VectorXd& y) { return std::cos(s) * y[0]; };
    auto fsum = [&](const VectorXd& y) { return f1(y) + f2(y); };
    auto gsum = [&](double s, const VectorXd& y) { return g1(s, y) + g2(s, y); };
    const VectorXd x = v1(0.8);
    const double t = 0.7;
    const double combined = solve_transport(field, fsum, gsum, t, x);
    const double split = solve_transport(field, f1, g1, t, x) + solve_transport(field, f2, g2, t, x);
    CHECK(combined == doctest::Approx(split).epsilon(1e-13));
}

TEST_CASE("transport solution satisfies the PDE at interior points") {
    // u(t, x) = f(F^t x) for B(y) = -y; residual u_t - B . grad u checked by
    // central differences.
    auto field = [](const VectorXd& y) { return VectorXd(-y); };
    auto f = [](const VectorXd& y) { return std::sin(y[0]); };
    auto u = [&](double t, double x) { return solve_transport(field, f, nullptr, t, v1(x)); };
    const double t = 0.5, x = 0.7, h = 1e-4;
    const double ut = (u(t + h, x) - u(t - h, x)) / (2.0 * h);
    const double ux = (u(t, x + h) - u(t, x - h)) / (2.0 * h);
    CHECK(std::abs(ut - (-x) * ux) <= 1e-4);
}
