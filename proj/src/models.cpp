#include "sedi/models.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "sedi/errors.hpp"

namespace sedi {

MatrixXd BlockSDE::sigma_full(const VectorXd& x) const {
    MatrixXd full = MatrixXd::Zero(n, m);
    full.topRows(d) = sigma(x);
    return full;
}

MatrixXd BlockSDE::diffusion_matrix(const VectorXd& x) const {
    const MatrixXd s = sigma(x);
    return s * s.transpose();
}

VectorXd BlockSDE::drift_diffusion(const VectorXd& x) const { return drift(x).head(d); }

VectorXd BlockSDE::complement_field(const VectorXd& x) const { return drift(x).tail(n - d); }

VectorXd BlockSDE::rates(const VectorXd& x) const {
    if (!rate_map) return x;
    return (rate_map->to_log * x).array().exp().matrix();
}

void validate_block_sde(const BlockSDE& model, double box_half_width, int samples, unsigned seed) {
    if (model.n < 1 || model.d < 1 || model.d > model.n)
        throw std::invalid_argument("BlockSDE: requires 1 <= d <= n");
    if (model.m < 1) throw std::invalid_argument("BlockSDE: requires m >= 1");
    if (!model.drift || !model.sigma) throw std::invalid_argument("BlockSDE: drift and sigma must be set");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-box_half_width, box_half_width);
    const double sep = 1e-3;
    const double quotient_cap = 1e8;

    for (int s = 0; s < samples; ++s) {
        VectorXd x(model.n);
        for (int i = 0; i < model.n; ++i) x[i] = unif(rng);
        const VectorXd b = model.drift(x);
        const MatrixXd sg = model.sigma(x);
        if (b.size() != model.n) throw std::invalid_argument("BlockSDE: drift dimension mismatch");
        if (sg.rows() != model.d || sg.cols() != model.m)
            throw std::invalid_argument("BlockSDE: sigma block must be d x m");
        if (!b.allFinite() || !sg.allFinite())
            throw std::invalid_argument("BlockSDE: non-finite coefficients inside the sample box");

        VectorXd y = x;
        for (int i = 0; i < model.n; ++i) y[i] += sep * (unif(rng) / box_half_width);
        const double dist = (y - x).norm();
        if (dist == 0.0) continue;
        const double qb = (model.drift(y) - b).norm() / dist;
        const double qs = (model.sigma(y) - sg).norm() / dist;
        if (!(qb < quotient_cap) || !(qs < quotient_cap))
            throw std::invalid_argument("BlockSDE: sampled difference quotients explode (coefficients not Lipschitz on the box)");
    }
}

BlockSDE make_toy_model(double sigma, double mu) {
    if (!(sigma > 0.0)) throw std::invalid_argument("make_toy_model: sigma must be > 0");
    BlockSDE model;
    model.n = 2;
    model.d = 1;
    model.m = 1;
    model.kind = "toy";
    model.drift = [mu](const VectorXd&) {
        VectorXd b(2);
        b << 0.0, mu;
        return b;
    };
    model.sigma = [sigma](const VectorXd&) {
        MatrixXd s(1, 1);
        s(0, 0) = sigma;
        return s;
    };
    validate_block_sde(model);
    return model;
}

namespace {

// Terminal-measure drift of the lognormal LIBOR model: for rate i,
//   muL_i(L) = - sum_{j>i} delta_j L_j (gamma_i . gamma_j) / (1 + delta_j L_j).
VectorXd lmm_rate_drift(const VectorXd& rates, const std::vector<double>& day_counts,
                        const MatrixXd& gram) {
    const int n = static_cast<int>(rates.size());
    VectorXd mu = VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = i + 1; j < n; ++j) {
            const double dl = day_counts[static_cast<std::size_t>(j)] * rates[j];
            acc -= dl * gram(i, j) / (1.0 + dl);
        }
        mu[i] = acc;
    }
    return mu;
}

}  // namespace

BlockSDE make_reduced_lmm(const std::vector<double>& tenors, const MatrixXd& F,
                          const VectorXd& initial_rates) {
    const int n = static_cast<int>(F.rows());
    const int d = static_cast<int>(F.cols());
    if (static_cast<int>(tenors.size()) != n + 1)
        throw std::invalid_argument("make_reduced_lmm: tenors must hold n+1 times");
    for (std::size_t k = 0; k + 1 < tenors.size(); ++k)
        if (!(tenors[k + 1] > tenors[k]))
            throw std::invalid_argument("make_reduced_lmm: tenors must be strictly increasing");
    if (initial_rates.size() != n)
        throw std::invalid_argument("make_reduced_lmm: initial_rates must have n entries");
    if ((initial_rates.array() <= 0.0).any())
        throw std::invalid_argument("make_reduced_lmm: initial rates must be positive");

    const FactorSplit split = factor_split(F);  // throws on rank deficiency

    std::vector<double> day_counts(static_cast<std::size_t>(n) + 1, 0.0);
    for (int j = 0; j < n; ++j)
        day_counts[static_cast<std::size_t>(j)] = tenors[static_cast<std::size_t>(j) + 1] - tenors[static_cast<std::size_t>(j)];

    // Rotation S = [F^T; G^T]: state y = S K with K the log-rates. The first
    // d coordinates carry the diffusion F^T F, the rest are drift-only.
    MatrixXd S(n, n);
    S.topRows(d) = F.transpose();
    S.bottomRows(n - d) = split.G.transpose();
    const MatrixXd S_inv = S.inverse();
    const MatrixXd gram = F * F.transpose();

    BlockSDE model;
    model.n = n;
    model.d = d;
    model.m = d;
    model.kind = "reduced_lmm";
    model.rate_map = LogRateMap{S_inv};
    model.drift = [S, S_inv, gram, day_counts](const VectorXd& y) {
        const VectorXd K = S_inv * y;
        const VectorXd L = K.array().exp().matrix();
        VectorXd muK = lmm_rate_drift(L, day_counts, gram);
        muK -= 0.5 * gram.diagonal();
        return VectorXd(S * muK);
    };
    const MatrixXd ftf = F.transpose() * F;
    model.sigma = [ftf](const VectorXd&) { return ftf; };
    validate_block_sde(model);
    return model;
}

VectorXd reduced_lmm_state(const MatrixXd& F, const VectorXd& initial_rates) {
    const FactorSplit split = factor_split(F);
    const int n = static_cast<int>(F.rows());
    const int d = static_cast<int>(F.cols());
    MatrixXd S(n, n);
    S.topRows(d) = F.transpose();
    S.bottomRows(n - d) = split.G.transpose();
    return S * initial_rates.array().log().matrix();
}

BlockSDE make_cheyette(const std::function<double(double)>& kappa,
                       const std::function<double(double)>& eta, double horizon) {
    if (!kappa || !eta) throw std::invalid_argument("make_cheyette: kappa and eta must be set");
    if (!(horizon > 0.0)) throw std::invalid_argument("make_cheyette: horizon must be > 0");

    const int probes = 65;
    const double k0 = kappa(0.0);
    const double e0 = eta(0.0);
    for (int i = 0; i < probes; ++i) {
        const double t = horizon * i / (probes - 1);
        const double kv = kappa(t);
        const double ev = eta(t);
        if (!std::isfinite(kv) || !std::isfinite(ev))
            throw std::invalid_argument("make_cheyette: kappa/eta non-finite on [0, horizon]");
        if (std::abs(kv - k0) > 1e-12 * (1.0 + std::abs(k0)) ||
            std::abs(ev - e0) > 1e-12 * (1.0 + std::abs(e0)))
            throw std::invalid_argument(
                "make_cheyette: time-varying kappa/eta are outside the time-homogeneous engine; "
                "supply constants");
    }

    BlockSDE model;
    model.n = 2;
    model.d = 1;
    model.m = 1;
    model.kind = "cheyette";
    model.drift = [k0, e0](const VectorXd& x) {
        VectorXd b(2);
        b[0] = x[1] - k0 * x[0];
        b[1] = e0 * e0 - 2.0 * k0 * x[1];
        return b;
    };
    model.sigma = [e0](const VectorXd&) {
        MatrixXd s(1, 1);
        s(0, 0) = e0;
        return s;
    };
    validate_block_sde(model);
    return model;
}

BlockSDE make_heston(double mu, double kappa, double theta, double xi, double rho) {
    if (kappa < 0.0 || theta < 0.0 || xi < 0.0)
        throw std::invalid_argument("make_heston: kappa, theta, xi must be >= 0");
    if (std::abs(rho) > 1.0) throw std::invalid_argument("make_heston: |rho| must be <= 1");

    BlockSDE model;
    model.n = 2;
    model.d = 2;
    model.m = 2;
    model.kind = "heston";
    model.drift = [mu, kappa, theta](const VectorXd& x) {
        VectorXd b(2);
        b[0] = mu * x[0];
        b[1] = kappa * (theta - std::max(x[1], 0.0));
        return b;
    };
    const double rho_bar = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    model.sigma = [xi, rho, rho_bar](const VectorXd& x) {
        const double vol = std::sqrt(std::max(x[1], 0.0));
        MatrixXd s(2, 2);
        s(0, 0) = vol * x[0];
        s(0, 1) = 0.0;
        s(1, 0) = xi * rho * vol;
        s(1, 1) = xi * rho_bar * vol;
        return s;
    };
    validate_block_sde(model);
    return model;
}

FactorSplit factor_split(const MatrixXd& F) {
    const int n = static_cast<int>(F.rows());
    const int d = static_cast<int>(F.cols());
    if (n < 1 || d < 1 || d > n) throw std::invalid_argument("factor_split: F must be n x d with 1 <= d <= n");

    Eigen::JacobiSVD<MatrixXd> svd(F, Eigen::ComputeFullU);
    const double smax = svd.singularValues()[0];
    int rank = 0;
    for (int k = 0; k < d; ++k)
        if (svd.singularValues()[k] > 1e-12 * std::max(smax, 1e-300)) ++rank;
    if (rank < d) {
        std::ostringstream msg;
        msg << "factor_split: F is rank-deficient (numerical rank " << rank << ", expected " << d << ")";
        throw std::invalid_argument(msg.str());
    }
    FactorSplit split;
    split.F = F;
    split.G = svd.matrixU().rightCols(n - d);
    return split;
}

namespace {

using FieldFn = std::function<VectorXd(const VectorXd&)>;

MatrixXd field_jacobian(const FieldFn& field, const VectorXd& x) {
    const int n = static_cast<int>(x.size());
    const double h = 1e-5 * (1.0 + x.norm());
    MatrixXd jac(n, n);
    VectorXd xp = x, xm = x;
    for (int j = 0; j < n; ++j) {
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        jac.col(j) = (field(xp) - field(xm)) / (2.0 * h);
        xp[j] = x[j];
        xm[j] = x[j];
    }
    return jac;
}

FieldFn lie_bracket(const FieldFn& v, const FieldFn& w) {
    return [v, w](const VectorXd& x) {
        const MatrixXd jw = field_jacobian(w, x);
        const MatrixXd jv = field_jacobian(v, x);
        return VectorXd(jw * v(x) - jv * w(x));
    };
}

// Fields of the Hörmander family: V_0 is the drift, V_1..V_m the diffusion
// columns. Depth r adds brackets nested r deep; the spanning set contains
// V_i for i >= 1 plus every bracket.
std::vector<FieldFn> bracket_generators(const BlockSDE& model, int depth,
                                        std::vector<FieldFn>& span_set) {
    std::vector<FieldFn> base;
    base.push_back([&model](const VectorXd& x) { return model.drift(x); });
    for (int i = 0; i < model.m; ++i) {
        base.push_back([&model, i](const VectorXd& x) { return VectorXd(model.sigma_full(x).col(i)); });
    }
    span_set.clear();
    for (int i = 1; i <= model.m; ++i) span_set.push_back(base[static_cast<std::size_t>(i)]);

    std::vector<FieldFn> level;
    if (depth >= 1) {
        for (std::size_t j = 0; j < base.size(); ++j)
            for (std::size_t k = j + 1; k < base.size(); ++k) level.push_back(lie_bracket(base[j], base[k]));
        for (const auto& f : level) span_set.push_back(f);
    }
    for (int r = 2; r <= depth; ++r) {
        std::vector<FieldFn> next;
        for (const auto& w : level)
            for (const auto& b : base) next.push_back(lie_bracket(w, b));
        for (const auto& f : next) span_set.push_back(f);
        level = std::move(next);
    }
    return base;
}

int rank_with_relative_threshold(const MatrixXd& columns) {
    if (columns.cols() == 0) return 0;
    Eigen::JacobiSVD<MatrixXd> svd(columns);
    const double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
    if (!(smax > 0.0)) return 0;
    int rank = 0;
    for (int k = 0; k < svd.singularValues().size(); ++k)
        if (svd.singularValues()[k] > 1e-8 * smax) ++rank;
    return rank;
}

MatrixXd span_columns(const BlockSDE& model, const VectorXd& x, int depth) {
    std::vector<FieldFn> span_set;
    bracket_generators(model, depth, span_set);
    MatrixXd cols(model.n, static_cast<int>(span_set.size()));
    for (std::size_t k = 0; k < span_set.size(); ++k) {
        const VectorXd v = span_set[k](x);
        if (!v.allFinite()) throw numerical_error("hoermander span: non-finite field evaluation near x");
        cols.col(static_cast<int>(k)) = v;
    }
    return cols;
}

// Orthonormal basis of the column span, relative singular-value threshold.
MatrixXd orthonormal_span(const MatrixXd& columns) {
    Eigen::JacobiSVD<MatrixXd> svd(columns, Eigen::ComputeThinU);
    const double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
    if (!(smax > 0.0)) return MatrixXd(columns.rows(), 0);
    int rank = 0;
    for (int k = 0; k < svd.singularValues().size(); ++k)
        if (svd.singularValues()[k] > 1e-8 * smax) ++rank;
    return svd.matrixU().leftCols(rank);
}

MatrixXd intersect_subspaces(const MatrixXd& u, const MatrixXd& v) {
    if (u.cols() == 0 || v.cols() == 0) return MatrixXd(u.rows(), 0);
    Eigen::JacobiSVD<MatrixXd> svd(MatrixXd(u.transpose() * v), Eigen::ComputeFullU);
    int keep = 0;
    for (int k = 0; k < svd.singularValues().size(); ++k)
        if (svd.singularValues()[k] >= 1.0 - 1e-7) ++keep;
    return u * svd.matrixU().leftCols(keep);
}

}  // namespace

int hoermander_rank(const BlockSDE& model, const VectorXd& x, int depth) {
    if (depth < 0) throw std::invalid_argument("hoermander_rank: depth must be >= 0");
    const MatrixXd cols = span_columns(model, x, depth);
    return rank_with_relative_threshold(cols.topRows(model.d));
}

MatrixXd invariant_subspace(const BlockSDE& model, const std::vector<VectorXd>& sample_points,
                            int depth) {
    if (sample_points.empty())
        throw std::invalid_argument("invariant_subspace: needs at least one sample point");
    MatrixXd basis = orthonormal_span(span_columns(model, sample_points[0], depth));
    for (std::size_t s = 1; s < sample_points.size(); ++s) {
        basis = intersect_subspaces(basis, orthonormal_span(span_columns(model, sample_points[s], depth)));
        if (basis.cols() == 0) break;
    }
    return basis;
}

}  // namespace sedi
