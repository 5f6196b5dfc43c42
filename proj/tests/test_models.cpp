#include <doctest.h>

#include <cmath>
#include <random>

#include "sedi/models.hpp"

using namespace sedi;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd v2(double a, double b) {
    VectorXd x(2);
    x << a, b;
    return x;
}

}  // namespace

TEST_CASE("toy model block structure") {
    const BlockSDE zero_drift = make_toy_model(1.0, 0.0);
    CHECK(zero_drift.complement_field(v2(0.3, -1.0)).norm() == 0.0);

    const BlockSDE toy = make_toy_model(1.0, 1.0);
    CHECK(toy.n == 2);
    CHECK(toy.d == 1);
    const VectorXd b = toy.drift(v2(0.5, 0.5));
    CHECK(b[0] == 0.0);
    CHECK(b[1] == 1.0);
    const MatrixXd full = toy.sigma_full(v2(0.0, 0.0));
    CHECK(full(0, 0) == 1.0);
    CHECK(full(1, 0) == 0.0);

    CHECK_THROWS_AS(make_toy_model(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("reduced LMM with invertible loading has no complement block") {
    MatrixXd F(2, 2);
    F << 0.2, 0.05, 0.2, -0.05;
    VectorXd L0 = v2(0.05, 0.04);
    const BlockSDE model = make_reduced_lmm({1.0, 2.0, 3.0}, F, L0);
    CHECK(model.n == 2);
    CHECK(model.d == 2);
    CHECK(model.complement_field(v2(0.1, 0.2)).size() == 0);
}

TEST_CASE("equal-row loading rotates the spread into a drift-only coordinate") {
    MatrixXd F(2, 1);
    F << 0.2, 0.2;
    const BlockSDE model = make_reduced_lmm({1.0, 2.0, 3.0}, F, v2(0.05, 0.05));
    CHECK(model.d == 1);
    // Diffusion block is F^T F; the rotated spread coordinate has no loading.
    const MatrixXd s = model.sigma_full(v2(-3.0, 0.1));
    CHECK(s(0, 0) == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(s(1, 0) == 0.0);
    // Spread of the log rates is (up to sign and scale) the second state
    // coordinate; its diffusion row vanishing is the reduced-model statement.
    REQUIRE(model.rate_map.has_value());
    const VectorXd state = reduced_lmm_state(F, v2(0.05, 0.04));
    const VectorXd rates = model.rates(state);
    CHECK(rates[0] == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(rates[1] == doctest::Approx(0.04).epsilon(1e-10));
}

TEST_CASE("LMM drift collapses to the quadratic-variation term as rates vanish") {
    MatrixXd F(2, 1);
    F << 0.25, 0.15;
    const BlockSDE model = make_reduced_lmm({0.5, 1.0, 1.5}, F, v2(0.05, 0.04));

    // State whose log rates are very negative: all L_j -> 0 and the
    // terminal-measure sum vanishes term by term.
    MatrixXd S(2, 2);
    const FactorSplit split = factor_split(F);
    S.row(0) = F.transpose();
    S.row(1) = split.G.transpose();
    const VectorXd K = v2(-80.0, -80.0);
    const VectorXd y = S * K;

    VectorXd muK_expected(2);
    const MatrixXd gram = F * F.transpose();
    muK_expected << -0.5 * gram(0, 0), -0.5 * gram(1, 1);
    const VectorXd expected = S * muK_expected;
    const VectorXd got = model.drift(y);
    CHECK((got - expected).norm() <= 1e-12);
}

TEST_CASE("reduced LMM rejects bad inputs") {
    MatrixXd rank_deficient(2, 2);
    rank_deficient << 0.2, 0.2, 0.2, 0.2;
    CHECK_THROWS_AS(make_reduced_lmm({1.0, 2.0, 3.0}, rank_deficient, v2(0.05, 0.04)),
                    std::invalid_argument);
    MatrixXd F(2, 1);
    F << 0.2, 0.1;
    CHECK_THROWS_AS(make_reduced_lmm({1.0, 2.0, 3.0}, F, v2(0.05, -0.01)), std::invalid_argument);
    CHECK_THROWS_AS(make_reduced_lmm({1.0, 0.5, 3.0}, F, v2(0.05, 0.04)), std::invalid_argument);
}

TEST_CASE("cheyette model drift and structure") {
    const BlockSDE model = make_cheyette([](double) { return 1.0; }, [](double) { return 0.4; });
    CHECK(model.d == 1);
    const VectorXd b = model.drift(v2(0.02, 0.01));
    CHECK(b[0] == doctest::Approx(0.01 - 1.0 * 0.02).epsilon(1e-14));
    CHECK(b[1] == doctest::Approx(0.4 * 0.4 - 2.0 * 1.0 * 0.01).epsilon(1e-14));

    CHECK_THROWS_AS(make_cheyette([](double t) { return 1.0 + t; }, [](double) { return 0.4; }),
                    std::invalid_argument);
}

TEST_CASE("heston parameter validation and truncation") {
    CHECK_THROWS_AS(make_heston(0.0, 1.0, 0.04, 0.5, 1.5), std::invalid_argument);
    const BlockSDE model = make_heston(0.05, 1.5, 0.04, 0.5, -0.3);
    CHECK(model.d == 2);
    // Negative variance is floored inside the coefficients.
    const MatrixXd s = model.sigma(v2(1.0, -0.5));
    CHECK(s.norm() == 0.0);
    // xi = 0 freezes the variance coordinate at theta when started there.
    const BlockSDE det = make_heston(0.05, 1.5, 0.04, 0.0, 0.0);
    CHECK(det.drift(v2(1.0, 0.04))[1] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("factor_split produces an orthonormal kernel basis") {
    MatrixXd F(2, 1);
    F << 1.0, 0.0;
    const FactorSplit split = factor_split(F);
    CHECK(std::abs(std::abs(split.G(1, 0)) - 1.0) <= 1e-14);
    CHECK(std::abs(split.G(0, 0)) <= 1e-14);

    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss(0.0, 1.0);
    MatrixXd R(4, 2);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 2; ++c) R(r, c) = gauss(rng);
    const FactorSplit rsplit = factor_split(R);
    CHECK((R * R.transpose() * rsplit.G).lpNorm<Eigen::Infinity>() <= 1e-10);
    CHECK((rsplit.G.transpose() * rsplit.G - MatrixXd::Identity(2, 2)).lpNorm<Eigen::Infinity>() <= 1e-12);

    MatrixXd deficient(3, 2);
    deficient << 1.0, 2.0, 2.0, 4.0, 3.0, 6.0;
    try {
        factor_split(deficient);
        CHECK(false);
    } catch (const std::invalid_argument& err) {
        CHECK(std::string(err.what()).find("rank 1") != std::string::npos);
    }
}

TEST_CASE("factor_split invariants over random full-rank loadings") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> ns(2, 5);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = ns(rng);
        std::uniform_int_distribution<int> ds(1, n);
        const int d = ds(rng);
        MatrixXd F(n, d);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < d; ++c) F(r, c) = gauss(rng);
        const FactorSplit split = factor_split(F);  // random Gaussian: full rank a.s.
        CHECK((split.G.transpose() * F).lpNorm<Eigen::Infinity>() <= 1e-12);
        CHECK((split.G.transpose() * split.G - MatrixXd::Identity(n - d, n - d)).lpNorm<Eigen::Infinity>() <=
              1e-12);
    }
}

TEST_CASE("sigma rows beyond the diffusion block are zero for every model") {
    std::vector<BlockSDE> models;
    models.push_back(make_toy_model(0.7, -0.3));
    models.push_back(make_cheyette([](double) { return 0.5; }, [](double) { return 0.3; }));
    MatrixXd F(3, 1);
    F << 0.2, 0.15, 0.1;
    VectorXd L0(3);
    L0 << 0.05, 0.04, 0.03;
    models.push_back(make_reduced_lmm({1.0, 2.0, 3.0, 4.0}, F, L0));

    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (const auto& model : models) {
        for (int s = 0; s < 16; ++s) {
            VectorXd x(model.n);
            for (int i = 0; i < model.n; ++i) x[i] = gauss(rng);
            const MatrixXd full = model.sigma_full(x);
            CHECK(full.bottomRows(model.n - model.d).lpNorm<Eigen::Infinity>() == 0.0);
        }
    }
}

TEST_CASE("hoermander rank of the toy model is one at depth zero") {
    const BlockSDE toy = make_toy_model(1.0, 1.0);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int k = 0; k < 10; ++k) {
        CHECK(hoermander_rank(toy, v2(gauss(rng), gauss(rng)), 0) == 1);
    }
}

TEST_CASE("vanishing diffusion has rank zero at every depth") {
    const BlockSDE silent = make_cheyette([](double) { return 1.0; }, [](double) { return 0.0; });
    CHECK(hoermander_rank(silent, v2(0.1, 0.2), 0) == 0);
    CHECK(hoermander_rank(silent, v2(0.1, 0.2), 2) == 0);
}

TEST_CASE("heston diffusion spans both coordinates away from the boundary") {
    const BlockSDE heston = make_heston(0.05, 1.5, 0.04, 0.5, 0.0);
    // Independent oracle: the two loading columns at (S, nu) = (1, 1).
    MatrixXd columns(2, 2);
    columns << std::sqrt(1.0) * 1.0, 0.0, 0.0, 0.5 * std::sqrt(1.0);
    Eigen::JacobiSVD<MatrixXd> svd(columns);
    REQUIRE(svd.singularValues()[1] > 1e-8 * svd.singularValues()[0]);
    CHECK(hoermander_rank(heston, v2(1.0, 1.0), 0) == 2);
}

TEST_CASE("rank is invariant under positive rescaling of the fields") {
    BlockSDE heston = make_heston(0.05, 1.5, 0.04, 0.5, 0.3);
    BlockSDE scaled = heston;
    const SigmaFn sigma = heston.sigma;
    const DriftFn drift = heston.drift;
    scaled.sigma = [sigma](const VectorXd& x) { return MatrixXd(37.0 * sigma(x)); };
    scaled.drift = [drift](const VectorXd& x) { return VectorXd(37.0 * drift(x)); };
    for (double nu : {0.5, 1.0, 2.0}) {
        CHECK(hoermander_rank(heston, v2(1.0, nu), 1) == hoermander_rank(scaled, v2(1.0, nu), 1));
    }
}

TEST_CASE("invariant subspace of the toy model is the first axis") {
    const BlockSDE toy = make_toy_model(1.0, 1.0);
    const MatrixXd basis = invariant_subspace(toy, {v2(0.0, 0.0), v2(1.0, -2.0), v2(-0.5, 3.0)}, 0);
    REQUIRE(basis.cols() == 1);
    CHECK(std::abs(std::abs(basis(0, 0)) - 1.0) <= 1e-12);
    CHECK(std::abs(basis(1, 0)) <= 1e-12);
}

TEST_CASE("single sample returns the local span") {
    const BlockSDE heston = make_heston(0.05, 1.5, 0.04, 0.5, 0.0);
    const MatrixXd basis = invariant_subspace(heston, {v2(1.0, 1.0)}, 0);
    CHECK(basis.cols() == 2);
}

TEST_CASE("glued spans intersect to the common direction") {
    // Hand-built model whose loading degenerates away from x1 = 0: at the
    // first sample both axes are spanned, at the second only the first.
    BlockSDE model;
    model.n = 2;
    model.d = 2;
    model.m = 2;
    model.drift = [](const VectorXd&) { return VectorXd::Zero(2); };
    model.sigma = [](const VectorXd& x) {
        MatrixXd s = MatrixXd::Zero(2, 2);
        s(0, 0) = 1.0;
        s(1, 1) = std::max(0.0, 1.0 - std::abs(x[0]));
        return s;
    };
    const MatrixXd basis = invariant_subspace(model, {v2(0.0, 0.0), v2(2.0, 0.0)}, 0);
    REQUIRE(basis.cols() == 1);
    CHECK(std::abs(std::abs(basis(0, 0)) - 1.0) <= 1e-10);

    // Monotone dimension in the number of samples.
    const MatrixXd one = invariant_subspace(model, {v2(0.0, 0.0)}, 0);
    CHECK(one.cols() >= basis.cols());
}

TEST_CASE("invariant_subspace requires a sample") {
    const BlockSDE toy = make_toy_model(1.0, 0.0);
    CHECK_THROWS_AS(invariant_subspace(toy, {}, 0), std::invalid_argument);
}
