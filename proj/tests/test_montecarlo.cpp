#include <doctest.h>

#include <cmath>

#include "sedi/errors.hpp"
#include "sedi/models.hpp"
#include "sedi/montecarlo.hpp"
#include "sedi/oracle.hpp"
#include "sedi/payoffs.hpp"
#include "sedi/scheme.hpp"

using namespace sedi;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd v2(double a, double b) {
    VectorXd x(2);
    x << a, b;
    return x;
}

Payoff make_payoff(std::function<double(const VectorXd&)> f, double growth = 4.0) {
    Payoff payoff;
    payoff.growth_C = growth;
    payoff.f = std::move(f);
    return payoff;
}

}  // namespace

TEST_CASE("price_first_order basics on the toy model") {
    const BlockSDE toy = make_toy_model(1.0, 1.0);

    SUBCASE("constant payoff averages the weights to one") {
        const Estimate est = price_first_order(toy, make_payoff([](const VectorXd&) { return 1.0; }),
                                               0.5, v2(0.0, 0.0), 20000, 4242);
        CHECK(std::abs(est.value - 1.0) <= 4.0 * est.std_error + 1e-12);
    }
    SUBCASE("pure diffusion moment") {
        const BlockSDE quiet = make_toy_model(1.0, 0.0);
        const Estimate est = price_first_order(
            quiet, make_payoff([](const VectorXd& x) { return x[0] * x[0]; }), 1.0, v2(0.0, 0.0),
            100000, 7);
        CHECK(std::abs(est.value - 1.0) <= 4.0 * est.std_error);
    }
    SUBCASE("separable payoff matches the exact oracle") {
        const Estimate est = price_first_order(
            toy, make_payoff([](const VectorXd& x) { return x[0] * x[0] + x[1]; }), 0.5,
            v2(0.0, 0.0), 100000, 99);
        const double exact = toy_exact([](double y) { return y * y; }, [](double y) { return y; },
                                       1.0, 1.0, 0.5, v2(0.0, 0.0));
        CHECK(std::abs(est.value - exact) <= 4.0 * est.std_error);
    }
}

TEST_CASE("price_first_order reproduces the hand-integrated representation") {
    // Payoff x1^2 x2^2 exercises the flow-time placement inside the Duhamel
    // source: the analytic first-order term is
    //   u1 = (x1^2 + C t) x2^2
    //      + 2 mu [x1^2 x2 t + x1^2 mu t^2/2 + C x2 t^2/2 + C mu t^3/6],
    // with C = sigma^2 (undilatated model).
    const double sigma = 1.0, mu = 1.0, tau = 0.25;
    const BlockSDE toy = make_toy_model(sigma, mu);
    const VectorXd x = v2(0.5, 0.3);
    const double C = sigma * sigma;
    const double expected = (x[0] * x[0] + C * tau) * x[1] * x[1] +
                            2.0 * mu *
                                (x[0] * x[0] * x[1] * tau + x[0] * x[0] * mu * tau * tau / 2.0 +
                                 C * x[1] * tau * tau / 2.0 + C * mu * tau * tau * tau / 6.0);
    const Estimate est = price_first_order(
        toy, make_payoff([](const VectorXd& y) { return y[0] * y[0] * y[1] * y[1]; }), tau, x,
        200000, 1234);
    CHECK(std::abs(est.value - expected) <= 4.0 * est.std_error);
}

TEST_CASE("reduced LMM linear spread at small maturity") {
    MatrixXd F(2, 1);
    F << 0.2, 0.2;
    const VectorXd L0 = v2(0.05, 0.04);
    const BlockSDE model = make_reduced_lmm({1.0, 2.0, 3.0}, F, L0);
    const VectorXd x0 = reduced_lmm_state(F, L0);
    const Payoff payoff = linear_spread(model, 0, 1, 1.0);
    const double T = 0.01;
    const Estimate est = price_first_order(model, payoff, T, x0, 100000, 5);
    CHECK(std::abs(est.value - (L0[0] - L0[1])) <= 4.0 * est.std_error + 5.0 * T);
}

TEST_CASE("estimates are reproducible bit-exactly and thread-invariantly") {
    const BlockSDE toy = make_toy_model(1.0, 1.0);
    const Payoff payoff = make_payoff([](const VectorXd& x) { return x[0] * x[0] + x[1]; });
    McOptions one_thread;
    one_thread.threads = 1;
    McOptions four_threads;
    four_threads.threads = 4;
    const Estimate a = price_first_order(toy, payoff, 0.5, v2(0.0, 0.0), 20000, 777, one_thread);
    const Estimate b = price_first_order(toy, payoff, 0.5, v2(0.0, 0.0), 20000, 777, four_threads);
    CHECK(a.value == b.value);
    CHECK(a.std_error == b.std_error);
    const Estimate c = price_first_order(toy, payoff, 0.5, v2(0.0, 0.0), 20000, 778, one_thread);
    CHECK(c.value != a.value);
}

TEST_CASE("standard error scales like one over root paths") {
    const BlockSDE toy = make_toy_model(1.0, 1.0);
    const Payoff payoff = make_payoff([](const VectorXd& x) { return x[0] * x[0] + x[1]; });
    std::vector<std::size_t> ladder{1000, 10000, 100000};
    std::vector<double> log_m, log_se;
    for (std::size_t m : ladder) {
        const Estimate est = price_first_order(toy, payoff, 0.5, v2(0.0, 0.0), m, 31415);
        log_m.push_back(std::log(static_cast<double>(m)));
        log_se.push_back(std::log(est.std_error));
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < ladder.size(); ++k) {
        sx += log_m[k];
        sy += log_se[k];
        sxx += log_m[k] * log_m[k];
        sxy += log_m[k] * log_se[k];
    }
    const double n = static_cast<double>(ladder.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(std::abs(slope + 0.5) <= 0.05);
}

TEST_CASE("correction_term on the toy model") {
    const double sigma = 1.0, mu = 1.0, tau = 0.3;
    const BlockSDE toy = make_toy_model(sigma, mu);

    SUBCASE("zero complement drift gives an exactly zero correction") {
        const BlockSDE quiet = make_toy_model(1.0, 0.0);
        TermEvaluator eval;
        eval.grad_diffusion = [](double, const VectorXd& s) { return VectorXd::Ones(s.size()); };
        eval.hess_diffusion = [](double, const VectorXd& s) {
            return MatrixXd::Identity(s.size(), s.size());
        };
        const Estimate est = correction_term(quiet, 1, eval, tau, v2(0.2, 0.1), 5000, 11);
        CHECK(est.value == 0.0);
        CHECK(est.std_error == 0.0);
    }
    SUBCASE("constant previous term contributes nothing") {
        TermEvaluator eval;
        eval.grad_diffusion = [](double, const VectorXd& s) { return VectorXd::Zero(s.size()); };
        eval.hess_diffusion = [](double, const VectorXd& s) {
            return MatrixXd::Zero(s.size(), s.size());
        };
        const Estimate est = correction_term(toy, 1, eval, tau, v2(0.2, 0.1), 5000, 13);
        CHECK(std::abs(est.value) <= 4.0 * est.std_error + 1e-12);
    }
    SUBCASE("closed-form previous term recovers the analytic correction") {
        // For payoff x1^2 x2 the first-order term is
        //   u1(s) = (x1^2 + C s) x2 + mu (x1^2 s + C s^2 / 2),
        // whose transported parabolic source makes du^3 = mu sigma^2 t^2 / 2.
        TermEvaluator eval;
        eval.grad_diffusion = [mu](double s, const VectorXd& state) {
            VectorXd g(2);
            g[0] = 2.0 * state[0] * state[1] + 2.0 * mu * state[0] * s;
            g[1] = 0.0;
            return g;
        };
        eval.hess_diffusion = [mu](double s, const VectorXd& state) {
            MatrixXd h = MatrixXd::Zero(2, 2);
            h(0, 0) = 2.0 * state[1] + 2.0 * mu * s;
            return h;
        };
        const double expected = mu * sigma * sigma * tau * tau / 2.0;
        const Estimate est = correction_term(toy, 1, eval, tau, v2(0.4, -0.2), 20000, 17);
        CHECK(std::abs(est.value - expected) <= 4.0 * est.std_error + 1e-6);
    }
    SUBCASE("grid-built evaluator cross-checks the scheme correction") {
        GridSpec spec;
        spec.axes.push_back({-3.0, 3.0, 61});
        spec.axes.push_back({-2.0, 2.0, 21});
        SchemeOptions opt;
        opt.l_max = 1;
        opt.tol = 0.0;
        auto payoff = [](const VectorXd& x) { return x[0] * x[0] * x[1]; };
        const SeriesSolution sol = run_series(toy, payoff, {1.0, tau}, spec, opt);
        const Estimate mc =
            correction_term(toy, 1, series_term_evaluator(sol, 0), tau, v2(0.0, 0.0), 20000, 19);
        const double grid_delta = sol.grid.interpolate(sol.deltas[0], v2(0.0, 0.0));
        CHECK(std::abs(mc.value - grid_delta) <= 4.0 * mc.std_error + 5e-3);
    }
}

TEST_CASE("price plus first correction agrees with the grid series") {
    const double tau = 0.3;
    const BlockSDE toy = make_toy_model(1.0, 1.0);
    const Payoff payoff = make_payoff([](const VectorXd& x) { return x[0] * x[0] * x[1]; });

    GridSpec spec;
    spec.axes.push_back({-3.5, 3.5, 71});
    spec.axes.push_back({-2.0, 2.0, 21});
    SchemeOptions opt;
    opt.l_max = 2;
    opt.tol = 0.0;
    const SeriesSolution sol = run_series(toy, payoff.f, {1.0, tau}, spec, opt);
    const double grid_value = sol.value_at(v2(0.0, 0.0));

    const Estimate price = price_first_order(toy, payoff, tau, v2(0.0, 0.0), 100000, 23);
    const Estimate corr =
        correction_term(toy, 1, series_term_evaluator(sol, 0), tau, v2(0.0, 0.0), 50000, 29);
    const double mc_value = price.value + corr.value;
    const double se = std::sqrt(price.std_error * price.std_error + corr.std_error * corr.std_error);
    CHECK(std::abs(mc_value - grid_value) <= 4.0 * se + 1e-2);
}

TEST_CASE("naive deltas on the toy model") {
    const BlockSDE toy = make_toy_model(1.0, 1.0);

    SUBCASE("transported linear payoff has unit slope") {
        const Estimate est = delta_naive(toy, make_payoff([](const VectorXd& x) { return x[1]; }),
                                         0.25, v2(0.0, 0.0), 1, 50000, 37);
        CHECK(std::abs(est.value - 1.0) <= 4.0 * est.std_error + 1e-10);
    }
    SUBCASE("constant payoff has zero delta") {
        const Estimate est = delta_naive(toy, make_payoff([](const VectorXd&) { return 5.0; }), 0.25,
                                         v2(0.0, 0.0), 0, 50000, 41);
        CHECK(std::abs(est.value) <= 4.0 * est.std_error + 1e-12);
    }
    SUBCASE("even payoff at the symmetry point has zero diffusion delta") {
        const Estimate est = delta_naive(
            toy, make_payoff([](const VectorXd& x) { return x[0] * x[0]; }), 0.25, v2(0.0, 0.0), 0,
            50000, 43);
        CHECK(std::abs(est.value) <= 4.0 * est.std_error);
    }
    SUBCASE("matches the finite-difference oracle away from symmetry") {
        const Payoff payoff = make_payoff([](const VectorXd& x) { return x[0] * x[0]; });
        const Estimate est = delta_naive(toy, payoff, 0.25, v2(1.0, 0.0), 0, 200000, 47);
        auto pricer = [&](const VectorXd& x) {
            return price_first_order(toy, payoff, 0.25, x, 200000, 47).value;
        };
        const double fd = fd_greek(pricer, v2(1.0, 0.0), 0);
        CHECK(std::abs(est.value - fd) <= 4.0 * est.std_error + 2e-2);
        CHECK(std::abs(est.value - 2.0) <= 4.0 * est.std_error);
    }
}

TEST_CASE("controlled deltas keep variance bounded as maturity shrinks") {
    const BlockSDE toy = make_toy_model(1.0, 1.0);
    const Payoff payoff = make_payoff([](const VectorXd& x) { return x[0] * x[0]; });
    const ControlFunction control = ControlFunction::standard(toy);
    const VectorXd x = v2(1.0, 0.0);
    const std::size_t paths = 20000;

    SUBCASE("value and oracle agreement") {
        const Estimate est = delta_controlled(toy, payoff, control, 0.25, x, 0, paths, 53);
        CHECK(std::abs(est.value - 2.0) <= 4.0 * est.std_error + 1e-10);
        auto pricer = [&](const VectorXd& y) {
            return price_first_order(toy, payoff, 0.25, y, 100000, 53).value;
        };
        const double fd = fd_greek(pricer, x, 0);
        CHECK(std::abs(est.value - fd) <= 4.0 * est.std_error + 2e-2);
    }
    SUBCASE("variance ratio across maturities") {
        auto sample_variance = [](const Estimate& est) {
            return est.std_error * est.std_error * static_cast<double>(est.paths);
        };
        const Estimate ctrl_slow = delta_controlled(toy, payoff, control, 1e-2, x, 0, paths, 59);
        const Estimate ctrl_fast = delta_controlled(toy, payoff, control, 1e-4, x, 0, paths, 59);
        CHECK(sample_variance(ctrl_fast) <= 10.0 * sample_variance(ctrl_slow));

        const Estimate naive_slow = delta_naive(toy, payoff, 1e-2, x, 0, paths, 61);
        const Estimate naive_fast = delta_naive(toy, payoff, 1e-4, x, 0, paths, 61);
        CHECK(sample_variance(naive_fast) >= 100.0 * sample_variance(naive_slow));
    }
    SUBCASE("weights degenerate to one for constant coefficients") {
        // phi coincides with the frozen kernel when the drift vanishes on the
        // diffusion block, so the controlled estimator is purely pathwise.
        const Estimate est = delta_controlled(toy, payoff, control, 1e-4, x, 0, 2000, 67);
        CHECK(est.std_error <= 1e-2);
    }
}

TEST_CASE("controlled delta rejects a singular control Jacobian") {
    const BlockSDE toy = make_toy_model(1.0, 1.0);
    ControlFunction broken;
    broken.g = [](double, const VectorXd& xd, const VectorXd&) { return xd; };
    broken.jacobian_xi = [](double, const VectorXd& xd, const VectorXd&) {
        return MatrixXd::Zero(xd.size(), xd.size());
    };
    CHECK_THROWS_AS(delta_controlled(toy, make_payoff([](const VectorXd& x) { return x[0]; }),
                                     broken, 0.25, v2(0.0, 0.0), 0, 100, 71),
                    numerical_error);
}

TEST_CASE("weighted estimators refuse payoffs that violate the smoothness split") {
    MatrixXd F(2, 1);
    F << 0.2, 0.2;
    const BlockSDE reduced = make_reduced_lmm({1.0, 2.0, 3.0}, F, v2(0.05, 0.05));
    const Payoff bad = spread_option(reduced, 0, 1);
    const VectorXd x0 = reduced_lmm_state(F, v2(0.05, 0.05));
    CHECK_THROWS_AS(price_first_order(reduced, bad, 0.1, x0, 100, 3), std::invalid_argument);
    McOptions forced;
    forced.override_assumptions = true;
    CHECK_NOTHROW(price_first_order(reduced, bad, 0.1, x0, 100, 3, forced));
}
