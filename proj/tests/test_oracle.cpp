#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "sedi/errors.hpp"
#include "sedi/models.hpp"
#include "sedi/montecarlo.hpp"
#include "sedi/oracle.hpp"
#include "sedi/payoffs.hpp"

using namespace sedi;
using Eigen::VectorXd;

namespace {

VectorXd v2(double a, double b) {
    VectorXd x(2);
    x << a, b;
    return x;
}

}  // namespace

TEST_CASE("toy_exact closed-form values") {
    SUBCASE("pure transport") {
        CHECK(toy_exact(nullptr, [](double y) { return y; }, 1.0, 1.0, 0.5, v2(0.0, 0.0)) ==
              doctest::Approx(0.5).epsilon(1e-14));
    }
    SUBCASE("Gaussian second moment") {
        CHECK(toy_exact([](double y) { return y * y; }, nullptr, 1.0, 0.0, 1.0, v2(0.0, 0.0)) ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("t = 0 evaluates the data directly") {
        CHECK(toy_exact([](double y) { return std::abs(y); }, [](double y) { return y; }, 1.0, 2.0,
                        0.0, v2(-0.3, 0.7)) == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("linearity in the data pair") {
        auto f1 = [](double y) { return std::sin(y); };
        auto f2 = [](double y) { return y * y * y; };
        auto g1 = [](double y) { return std::exp(-y * y); };
        auto g2 = [](double y) { return 2.0 * y; };
        const VectorXd x = v2(0.4, -0.2);
        const double split = toy_exact(f1, g1, 0.7, 0.3, 0.6, x) + toy_exact(f2, g2, 0.7, 0.3, 0.6, x);
        const double joint = toy_exact([&](double y) { return f1(y) + f2(y); },
                                       [&](double y) { return g1(y) + g2(y); }, 0.7, 0.3, 0.6, x);
        CHECK(joint == doctest::Approx(split).epsilon(1e-13));
    }
}

TEST_CASE("euler_simulate reproduces deterministic structure") {
    SUBCASE("zero volatility gives the drift ODE iterates") {
        const BlockSDE det = make_cheyette([](double) { return 0.5; }, [](double) { return 0.0; });
        const EulerPathSet set = euler_simulate(det, v2(0.1, 0.02), 1.0, 16, 4, 9);
        // Recompute the recursion independently.
        VectorXd x = v2(0.1, 0.02);
        const double dt = 1.0 / 16.0;
        for (int k = 0; k < 16; ++k) x += det.drift(x) * dt;
        for (std::size_t p = 0; p < set.paths; ++p) {
            CHECK((set.terminal(p) - x).norm() <= 1e-14);
        }
    }
    SUBCASE("toy complement coordinate moves deterministically on every path") {
        const BlockSDE toy = make_toy_model(1.0, 0.7);
        const EulerPathSet set = euler_simulate(toy, v2(0.0, 0.2), 1.0, 8, 64, 11);
        for (std::size_t p = 0; p < set.paths; ++p)
            CHECK(set.terminal(p)[1] == doctest::Approx(0.2 + 0.7).epsilon(1e-14));
    }
    SUBCASE("terminal variance matches the Gaussian law") {
        const BlockSDE toy = make_toy_model(0.8, 0.0);
        const std::size_t paths = 100000;
        const EulerPathSet set = euler_simulate(toy, v2(0.0, 0.0), 1.0, 4, paths, 13);
        double m = 0.0, m2 = 0.0, m4 = 0.0;
        for (std::size_t p = 0; p < paths; ++p) {
            const double x = set.terminal(p)[0];
            m += x;
            m2 += x * x;
            m4 += x * x * x * x;
        }
        m /= paths;
        m2 /= paths;
        m4 /= paths;
        const double var = m2 - m * m;
        // std error of the sample variance ~ sqrt((m4 - m2^2)/paths)
        const double se = std::sqrt((m4 - m2 * m2) / paths);
        CHECK(std::abs(var - 0.64) <= 4.0 * se);
    }
    SUBCASE("cheyette convexity accumulator follows its ODE exactly when eta is constant") {
        const BlockSDE chey = make_cheyette([](double) { return 0.0; }, [](double) { return 0.3; });
        const EulerPathSet set = euler_simulate(chey, v2(0.0, 0.0), 2.0, 32, 8, 5);
        // kappa = 0: Y(t) = eta^2 t along every path, and the Euler recursion
        // reproduces it exactly; sample variance of Y is zero.
        for (std::size_t p = 0; p < set.paths; ++p)
            CHECK(set.terminal(p)[1] == doctest::Approx(0.09 * 2.0).epsilon(1e-13));
    }
}

TEST_CASE("cheyette mean matches the moment ODE") {
    const double kappa = 1.0, eta = 1.0, T = 1.0;
    const BlockSDE chey =
        make_cheyette([kappa](double) { return kappa; }, [eta](double) { return eta; });
    const std::size_t paths = 200000;
    const EulerPathSet set = euler_simulate(chey, v2(0.0, 0.0), T, 64, paths, 21);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t p = 0; p < paths; ++p) {
        const double x = set.terminal(p)[0];
        mean += x;
        m2 += x * x;
    }
    mean /= paths;
    m2 /= paths;
    const double se = std::sqrt((m2 - mean * mean) / paths);

    // Independent oracle: Y(t) solves y' = eta^2 - 2 kappa y exactly, and the
    // mean m(t) of X solves m' = y - kappa m; integrate finely on the same
    // Euler time grid so the discretization bias cancels.
    double y = 0.0, m = 0.0;
    const double dt = T / 64.0;
    for (int k = 0; k < 64; ++k) {
        const double ynew = y + dt * (eta * eta - 2.0 * kappa * y);
        m += dt * (y - kappa * m);
        y = ynew;
    }
    CHECK(std::abs(mean - m) <= 3.0 * se);
}

TEST_CASE("euler_price basics and cross-validation") {
    SUBCASE("constant payoff is exact with zero error") {
        const BlockSDE toy = make_toy_model(1.0, 1.0);
        Payoff constant;
        constant.f = [](const VectorXd&) { return 3.25; };
        const Estimate est = euler_price(toy, constant, v2(0.0, 0.0), 1.0, 8, 512, 3);
        CHECK(est.value == doctest::Approx(3.25).epsilon(1e-14));
        CHECK(est.std_error == 0.0);
    }
    SUBCASE("toy separable payoff matches the exact oracle") {
        const BlockSDE toy = make_toy_model(1.0, 1.0);
        Payoff payoff;
        payoff.f = [](const VectorXd& x) { return x[0] * x[0] + x[1]; };
        const Estimate est = euler_price(toy, payoff, v2(0.0, 0.0), 1.0, 16, 100000, 31);
        CHECK(std::abs(est.value - 2.0) <= 4.0 * est.std_error);
    }
}

TEST_CASE("fd_greek on deterministic pricers") {
    SUBCASE("linear pricer recovers the slope") {
        auto pricer = [](const VectorXd& x) { return 3.0 * x[0] - 2.0 * x[1] + 1.0; };
        CHECK(fd_greek(pricer, v2(0.4, -0.7), 0) == doctest::Approx(3.0).epsilon(1e-10));
        CHECK(fd_greek(pricer, v2(0.4, -0.7), 1) == doctest::Approx(-2.0).epsilon(1e-10));
    }
    SUBCASE("constant pricer has zero greeks") {
        auto pricer = [](const VectorXd&) { return 42.0; };
        CHECK(fd_greek(pricer, v2(0.0, 0.0), 0) == 0.0);
    }
    SUBCASE("halving h shrinks the truncation error quadratically") {
        auto pricer = [](const VectorXd& x) { return std::sin(x[0]); };
        const VectorXd x = v2(0.6, 0.0);
        const double exact = std::cos(0.6);
        const double e1 = std::abs(fd_greek(pricer, x, 0, 2e-2) - exact);
        const double e2 = std::abs(fd_greek(pricer, x, 0, 1e-2) - exact);
        CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
    }
}

TEST_CASE("strong order of the Euler scheme") {
    SUBCASE("geometric Brownian motion converges with order one half") {
        const GbmReference gbm = make_gbm(0.06, 0.3);
        const double gamma = strong_order(gbm, 1.0, 1.0, {8, 16, 32, 64, 128}, 10000, 99);
        CHECK(gamma >= 0.4);
        CHECK(gamma <= 0.6);
    }
    SUBCASE("pure drift converges with order one") {
        const GbmReference ode = make_gbm(0.8, 0.0);
        const double gamma = strong_order(ode, 1.0, 1.0, {8, 16, 32, 64, 128}, 64, 7);
        CHECK(gamma >= 0.8);
        CHECK(gamma <= 1.2);
    }
    SUBCASE("short ladders are rejected") {
        const GbmReference gbm = make_gbm(0.06, 0.3);
        CHECK_THROWS_AS(strong_order(gbm, 1.0, 1.0, {8, 16}, 1000, 1), std::invalid_argument);
    }
}

TEST_CASE("refining the Euler grid shrinks the strong error") {
    const GbmReference gbm = make_gbm(0.05, 0.25);
    const StrongOrderTable table = strong_order_table(gbm, 1.0, 1.0, {8, 32, 128}, 20000, 17);
    CHECK(table.error[1] < table.error[0]);
    CHECK(table.error[2] < table.error[1]);
}

TEST_CASE("euler path sets round-trip through the binary dump") {
    const BlockSDE toy = make_toy_model(1.0, 0.5);
    const EulerPathSet set = euler_simulate(toy, v2(0.1, -0.2), 0.5, 4, 8, 23);
    const std::string path = (std::filesystem::temp_directory_path() / "sedi_paths_test.bin").string();
    write_euler_paths(path, set);
    const EulerPathSet back = read_euler_paths(path);
    std::remove(path.c_str());
    CHECK(back.paths == set.paths);
    CHECK(back.steps == set.steps);
    CHECK(back.n == set.n);
    CHECK(back.dt == set.dt);
    CHECK(back.seed == set.seed);
    CHECK(back.states == set.states);
}
