#include "sedi/oracle.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "sedi/errors.hpp"
#include "sedi/parallel.hpp"
#include "sedi/quadrature.hpp"
#include "sedi/rng.hpp"

namespace sedi {

double toy_exact(const std::function<double(double)>& f, const std::function<double(double)>& g,
                 double sigma, double mu, double t, const VectorXd& x) {
    if (t < 0.0) throw std::invalid_argument("toy_exact: t must be >= 0");
    const double transported = g ? g(x[1] + mu * t) : 0.0;
    if (!f) return transported;
    if (t == 0.0) return f(x[0]) + transported;

    const GaussHermiteRule& rule = gauss_hermite(64);
    const double scale = sigma * std::sqrt(2.0 * t);
    double acc = 0.0;
    for (int k = 0; k < rule.order(); ++k) {
        const double y = x[0] + scale * rule.nodes[k];
        const double v = f(y);
        if (!std::isfinite(v)) throw numerical_error("toy_exact: non-finite data on a quadrature node");
        acc += rule.weights[k] * v;
    }
    return acc / std::sqrt(M_PI) + transported;
}

VectorXd EulerPathSet::terminal(std::size_t path) const {
    VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = state(path, steps, i);
    return x;
}

namespace {

// One Euler path; `record` receives every state slice when non-null.
VectorXd euler_path(const BlockSDE& model, const VectorXd& x0, double dt, std::size_t steps,
                    PathRng& rng, const std::function<void(std::size_t, const VectorXd&)>& record) {
    VectorXd x = x0;
    if (record) record(0, x);
    const double root_dt = std::sqrt(dt);
    VectorXd dw(model.m);
    for (std::size_t k = 0; k < steps; ++k) {
        for (int i = 0; i < model.m; ++i) dw[i] = root_dt * rng.normal();
        x += model.drift(x) * dt + model.sigma_full(x) * dw;
        if (!x.allFinite()) throw numerical_error("euler_simulate: non-finite state");
        if (record) record(k + 1, x);
    }
    return x;
}

}  // namespace

EulerPathSet euler_simulate(const BlockSDE& model, const VectorXd& x0, double T, std::size_t steps,
                            std::size_t paths, std::uint64_t seed) {
    if (!(T > 0.0)) throw std::invalid_argument("euler_simulate: T must be > 0");
    if (steps < 1 || paths < 1) throw std::invalid_argument("euler_simulate: steps and paths must be >= 1");
    EulerPathSet set;
    set.paths = paths;
    set.steps = steps;
    set.n = model.n;
    set.dt = T / static_cast<double>(steps);
    set.seed = seed;
    set.states.assign(paths * (steps + 1) * static_cast<std::size_t>(model.n), 0.0);

    parallel_for(paths, [&](std::size_t p) {
        PathRng rng(seed, p);
        euler_path(model, x0, set.dt, steps, rng, [&](std::size_t k, const VectorXd& x) {
            double* slot = set.states.data() + (p * (steps + 1) + k) * static_cast<std::size_t>(model.n);
            for (int i = 0; i < model.n; ++i) slot[i] = x[i];
        });
    });
    return set;
}

Estimate euler_price(const BlockSDE& model, const Payoff& payoff, const VectorXd& x0, double T,
                     std::size_t steps, std::size_t paths, std::uint64_t seed) {
    if (!(T > 0.0)) throw std::invalid_argument("euler_price: T must be > 0");
    if (steps < 1 || paths < 1) throw std::invalid_argument("euler_price: steps and paths must be >= 1");
    const auto start = std::chrono::steady_clock::now();
    const double dt = T / static_cast<double>(steps);

    std::vector<double> values(paths, 0.0);
    parallel_for(paths, [&](std::size_t p) {
        PathRng rng(seed, p);
        const VectorXd terminal = euler_path(model, x0, dt, steps, rng, nullptr);
        const double v = payoff.f(terminal);
        if (!std::isfinite(v)) throw numerical_error("euler_price: non-finite payoff value");
        values[p] = v;
    });

    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(paths);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var = paths > 1 ? var / static_cast<double>(paths - 1) : 0.0;

    Estimate est;
    est.value = mean;
    est.std_error = std::sqrt(var / static_cast<double>(paths));
    est.paths = paths;
    est.seed = seed;
    est.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return est;
}

double fd_greek(const std::function<double(const VectorXd&)>& pricer, const VectorXd& x, int coord,
                double h) {
    if (coord < 0 || coord >= x.size()) throw std::invalid_argument("fd_greek: coordinate out of range");
    if (h == 0.0) h = 1e-3 * (1.0 + std::abs(x[coord]));
    VectorXd xp = x, xm = x;
    xp[coord] += h;
    xm[coord] -= h;
    return (pricer(xp) - pricer(xm)) / (2.0 * h);
}

double GbmReference::exact_terminal(double x0, double T, double WT) const {
    return x0 * std::exp((mu - 0.5 * sigma * sigma) * T + sigma * WT);
}

GbmReference make_gbm(double mu, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("make_gbm: sigma must be >= 0");
    GbmReference ref;
    ref.mu = mu;
    ref.sigma = sigma;
    ref.model.n = 1;
    ref.model.d = 1;
    ref.model.m = 1;
    ref.model.kind = "gbm";
    ref.model.drift = [mu](const VectorXd& x) { return VectorXd(mu * x); };
    ref.model.sigma = [sigma](const VectorXd& x) {
        MatrixXd s(1, 1);
        s(0, 0) = sigma * x[0];
        return s;
    };
    validate_block_sde(ref.model);
    return ref;
}

double strong_order(const GbmReference& reference, double x0, double T,
                    const std::vector<int>& steps_ladder, std::size_t paths, std::uint64_t seed) {
    return strong_order_table(reference, x0, T, steps_ladder, paths, seed).gamma;
}

StrongOrderTable strong_order_table(const GbmReference& reference, double x0, double T,
                                    const std::vector<int>& steps_ladder, std::size_t paths,
                                    std::uint64_t seed) {
    if (steps_ladder.size() < 3) throw std::invalid_argument("strong_order: ladder needs >= 3 rungs");
    int finest = 0;
    for (int s : steps_ladder) {
        if (s < 1) throw std::invalid_argument("strong_order: step counts must be >= 1");
        finest = std::max(finest, s);
    }
    for (int s : steps_ladder)
        if (finest % s != 0)
            throw std::invalid_argument("strong_order: every rung must divide the finest step count");

    const std::size_t rungs = steps_ladder.size();
    std::vector<std::vector<double>> abs_errors(rungs, std::vector<double>(paths, 0.0));

    parallel_for(paths, [&](std::size_t p) {
        PathRng rng(seed, p);
        // Finest Brownian increments, shared across every rung.
        std::vector<double> dw(static_cast<std::size_t>(finest));
        const double fine_dt = T / finest;
        const double root = std::sqrt(fine_dt);
        double WT = 0.0;
        for (int k = 0; k < finest; ++k) {
            dw[static_cast<std::size_t>(k)] = root * rng.normal();
            WT += dw[static_cast<std::size_t>(k)];
        }
        const double exact = reference.exact_terminal(x0, T, WT);

        for (std::size_t r = 0; r < rungs; ++r) {
            const int steps = steps_ladder[r];
            const int bucket = finest / steps;
            const double dt = T / steps;
            double y = x0;
            int k = 0;
            for (int s = 0; s < steps; ++s) {
                double dws = 0.0;
                for (int b = 0; b < bucket; ++b) dws += dw[static_cast<std::size_t>(k++)];
                y += reference.mu * y * dt + reference.sigma * y * dws;
            }
            abs_errors[r][p] = std::abs(exact - y);
        }
    });

    StrongOrderTable table;
    std::vector<double> log_dt(rungs), log_err(rungs);
    for (std::size_t r = 0; r < rungs; ++r) {
        double mean = 0.0;
        for (double e : abs_errors[r]) mean += e;
        mean /= static_cast<double>(paths);
        if (!(mean > 0.0)) throw numerical_error("strong_order: zero strong error; order undefined");
        table.dt.push_back(T / steps_ladder[r]);
        table.error.push_back(mean);
        log_dt[r] = std::log(T / steps_ladder[r]);
        log_err[r] = std::log(mean);
    }
    // Least-squares slope of log error against log dt.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t r = 0; r < rungs; ++r) {
        sx += log_dt[r];
        sy += log_err[r];
        sxx += log_dt[r] * log_dt[r];
        sxy += log_dt[r] * log_err[r];
    }
    const double nr = static_cast<double>(rungs);
    table.gamma = (nr * sxy - sx * sy) / (nr * sxx - sx * sx);
    return table;
}

void write_euler_paths(const std::string& path, const EulerPathSet& set) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_euler_paths: cannot open " + path);
    const std::uint64_t header[3] = {set.paths, set.steps, static_cast<std::uint64_t>(set.n)};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(&set.dt), sizeof(set.dt));
    out.write(reinterpret_cast<const char*>(&set.seed), sizeof(set.seed));
    out.write(reinterpret_cast<const char*>(set.states.data()),
              static_cast<std::streamsize>(set.states.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write_euler_paths: write failed for " + path);
}

EulerPathSet read_euler_paths(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_euler_paths: cannot open " + path);
    std::uint64_t header[3] = {0, 0, 0};
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    EulerPathSet set;
    set.paths = header[0];
    set.steps = header[1];
    set.n = static_cast<int>(header[2]);
    in.read(reinterpret_cast<char*>(&set.dt), sizeof(set.dt));
    in.read(reinterpret_cast<char*>(&set.seed), sizeof(set.seed));
    set.states.assign(set.paths * (set.steps + 1) * static_cast<std::size_t>(set.n), 0.0);
    in.read(reinterpret_cast<char*>(set.states.data()),
            static_cast<std::streamsize>(set.states.size() * sizeof(double)));
    if (!in) throw std::runtime_error("read_euler_paths: truncated file " + path);
    return set;
}

}  // namespace sedi
