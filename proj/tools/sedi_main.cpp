#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sedi/config.hpp"
#include "sedi/errors.hpp"
#include "sedi/models.hpp"
#include "sedi/montecarlo.hpp"
#include "sedi/oracle.hpp"
#include "sedi/parallel.hpp"
#include "sedi/scheme.hpp"

namespace {

using namespace sedi;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct CommonArgs {
    std::string config_path;
    std::string out_path;
    int threads = 0;
    // Optional overrides; negative sentinel = keep config value.
    double seed = -1.0;
    double paths = -1.0;
    double rho = -1.0;
    double t0 = -1.0;
    double tol = -1.0;
    std::vector<int> coords;
};

std::string fmt(double v) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return buffer;
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + out_path);
    out << text;
}

struct Loaded {
    RunConfig config;
    BlockSDE model;
    Payoff payoff;
    VectorXd x0;
    double T = 0.0;
    SchemeConfig scheme;
    McConfig mc;
};

Loaded load(const CommonArgs& args) {
    set_default_thread_count(args.threads);
    Loaded run{RunConfig::from_file(args.config_path), {}, {}, {}, 0.0, {}, {}};
    run.config.validate();
    run.model = run.config.build_model();
    run.payoff = run.config.build_payoff(run.model);
    run.x0 = run.config.initial_state(run.model);
    run.T = run.config.horizon();
    run.scheme = run.config.scheme();
    run.mc = run.config.mc();
    if (args.seed >= 0.0) run.mc.seed = static_cast<std::uint64_t>(args.seed);
    if (args.paths >= 0.0) run.mc.paths = static_cast<std::size_t>(args.paths);
    if (args.rho >= 0.0) run.scheme.rho = args.rho;
    if (args.t0 >= 0.0) run.scheme.t0 = args.t0;
    if (args.tol >= 0.0) run.scheme.tol = args.tol;
    return run;
}

GridSpec grid_for(const Loaded& run, double horizon) {
    return GridSpec::auto_box(run.model, run.x0, std::max(horizon, 1e-6),
                              run.scheme.grid.diffusion_nodes, run.scheme.grid.complement_nodes,
                              run.scheme.grid.diffusion_sds);
}

SchemeOptions scheme_options(const Loaded& run) {
    SchemeOptions opt;
    opt.time_intervals = run.scheme.grid.time_intervals;
    opt.quadrature_order = run.scheme.grid.quadrature_order;
    opt.l_max = run.scheme.l_max;
    opt.tol = run.scheme.tol;
    return opt;
}

int cmd_price(const CommonArgs& args) {
    const Loaded run = load(args);
    const double t0 = run.scheme.t0 > 0.0 ? run.scheme.t0 : run.T / (run.scheme.steps * run.scheme.rho);
    const GridSpec grid = grid_for(run, run.T);
    const SchemeOptions opt = scheme_options(run);

    const std::vector<SeriesSolution> steps =
        time_march(run.model, run.payoff, run.T, run.scheme.steps, {run.scheme.rho, t0}, grid, opt);
    const SeriesSolution& last = steps.back();
    const double scheme_value = last.value_at(run.x0);
    const double residual = residual_norm(run.model, last);
    const double last_norm = last.term_norms.empty() ? 0.0 : last.term_norms.back();

    const Estimate mc = price_first_order(run.model, run.payoff, run.T, run.x0, run.mc.paths, run.mc.seed);

    // First-order grid pass over the full horizon feeds the correction estimator.
    SchemeOptions first_opt = opt;
    first_opt.l_max = 1;
    first_opt.tol = 0.0;
    const SeriesSolution one_step = run_series(run.model, run.payoff, {1.0, run.T}, grid, first_opt);
    const Estimate correction = correction_term(run.model, 1, series_term_evaluator(one_step, 0),
                                                run.T, run.x0, run.mc.paths, run.mc.seed);

    std::ostringstream csv;
    csv << "method,value,std_error,paths,seed,steps,truncation_level,fitted_c,last_term_norm,residual_norm\n";
    csv << "scheme," << fmt(scheme_value) << ",,0,0," << run.scheme.steps << ","
        << last.truncation_level << "," << fmt(last.fitted_contraction) << "," << fmt(last_norm)
        << "," << fmt(residual) << "\n";
    csv << "mc_first_order," << fmt(mc.value) << "," << fmt(mc.std_error) << "," << mc.paths << ","
        << mc.seed << ",,,,,\n";
    csv << "mc_corrected," << fmt(mc.value + correction.value) << ","
        << fmt(std::sqrt(mc.std_error * mc.std_error + correction.std_error * correction.std_error))
        << "," << mc.paths << "," << mc.seed << ",,,,,\n";
    emit(args.out_path.empty() ? run.config.output() : args.out_path, csv.str());
    return 0;
}

int cmd_greeks(const CommonArgs& args) {
    const Loaded run = load(args);
    std::vector<int> coords = args.coords;
    if (coords.empty()) {
        coords = run.config.greek_coords(run.model);
    } else {
        for (int& c : coords) {
            if (c < 1 || c > run.model.n) throw config_error("--coords entry out of range");
            c -= 1;
        }
    }

    std::ostringstream csv;
    csv << "estimator,coord,value,std_error,paths,seed\n";
    const ControlFunction control = ControlFunction::standard(run.model);
    for (int coord : coords) {
        const Estimate naive =
            delta_naive(run.model, run.payoff, run.T, run.x0, coord, run.mc.paths, run.mc.seed);
        const Estimate controlled = delta_controlled(run.model, run.payoff, control, run.T, run.x0,
                                                     coord, run.mc.paths, run.mc.seed);
        const auto pricer = [&](const VectorXd& x) {
            return price_first_order(run.model, run.payoff, run.T, x, run.mc.paths, run.mc.seed).value;
        };
        const double fd = fd_greek(pricer, run.x0, coord);
        csv << "naive," << coord + 1 << "," << fmt(naive.value) << "," << fmt(naive.std_error) << ","
            << naive.paths << "," << naive.seed << "\n";
        csv << "controlled," << coord + 1 << "," << fmt(controlled.value) << ","
            << fmt(controlled.std_error) << "," << controlled.paths << "," << controlled.seed << "\n";
        csv << "fd," << coord + 1 << "," << fmt(fd) << ",," << run.mc.paths << "," << run.mc.seed
            << "\n";
    }
    emit(args.out_path.empty() ? run.config.output() : args.out_path, csv.str());
    return 0;
}

int cmd_series_study(const CommonArgs& args) {
    const Loaded run = load(args);
    std::vector<double> candidates = run.scheme.rho_candidates;
    if (args.rho >= 0.0) candidates = {args.rho};
    if (candidates.empty()) throw config_error("series-study: scheme.rho_candidates is empty");
    const double t0 = run.scheme.t0 > 0.0 ? run.scheme.t0 : run.T;
    const GridSpec grid = grid_for(run, candidates.front() * t0);
    SchemeOptions opt = scheme_options(run);
    opt.tol = 0.0;  // always compute l_max terms for the study

    std::ostringstream csv;
    csv << "rho,t0,l,term_norm,fitted_c\n";
    for (double rho : candidates) {
        const SeriesSolution sol = run_series(run.model, run.payoff, {rho, t0}, grid, opt);
        for (std::size_t l = 0; l < sol.term_norms.size(); ++l)
            csv << fmt(rho) << "," << fmt(t0) << "," << l + 1 << "," << fmt(sol.term_norms[l]) << ","
                << fmt(sol.fitted_contraction) << "\n";
    }
    emit(args.out_path.empty() ? run.config.output() : args.out_path, csv.str());
    return 0;
}

int cmd_order_study(const CommonArgs& args) {
    const Loaded run = load(args);
    const OrderConfig order = run.config.order();
    const GbmReference ref = make_gbm(order.mu, order.sigma);
    const StrongOrderTable table =
        strong_order_table(ref, order.x0, order.horizon, order.ladder, order.paths, run.mc.seed);

    std::ostringstream csv;
    csv << "dt,strong_error,fitted_gamma\n";
    for (std::size_t r = 0; r < table.dt.size(); ++r)
        csv << fmt(table.dt[r]) << "," << fmt(table.error[r]) << "," << fmt(table.gamma) << "\n";
    emit(args.out_path.empty() ? run.config.output() : args.out_path, csv.str());
    return 0;
}

int cmd_rank(const CommonArgs& args) {
    const Loaded run = load(args);
    const RankConfig rank = run.config.rank();

    std::vector<VectorXd> points;
    for (const auto& p : rank.points) {
        if (static_cast<int>(p.size()) != run.model.n)
            throw config_error("rank.points entries must match the state dimension");
        VectorXd x(run.model.n);
        for (int i = 0; i < run.model.n; ++i) x[i] = p[static_cast<std::size_t>(i)];
        points.push_back(x);
    }
    if (points.empty()) {
        std::mt19937_64 rng(run.mc.seed);
        std::uniform_real_distribution<double> unif(-rank.box, rank.box);
        for (int k = 0; k < rank.n_random; ++k) {
            VectorXd x = run.x0;
            for (int i = 0; i < run.model.n; ++i) x[i] += unif(rng);
            points.push_back(x);
        }
    }

    const MatrixXd basis = invariant_subspace(run.model, points, rank.depth);
    std::ostringstream csv;
    csv << "point_index,point,rank,subspace_dim\n";
    for (std::size_t k = 0; k < points.size(); ++k) {
        std::ostringstream coords;
        for (int i = 0; i < run.model.n; ++i) {
            if (i) coords << ";";
            coords << fmt(points[k][i]);
        }
        csv << k << ",\"" << coords.str() << "\"," << hoermander_rank(run.model, points[k], rank.depth)
            << "," << basis.cols() << "\n";
    }
    emit(args.out_path.empty() ? run.config.output() : args.out_path, csv.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pricing engine for block-structured semi-elliptic diffusion models"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", args.config_path, "JSON run configuration")->required();
        cmd->add_option("--out", args.out_path, "output CSV path (default: config output, else stdout)");
        cmd->add_option("--seed", args.seed, "override mc.seed");
        cmd->add_option("--threads", args.threads, "worker threads (0 = logical cores)");
        cmd->add_option("--paths", args.paths, "override mc.paths");
        cmd->add_option("--rho", args.rho, "override scheme.rho");
        cmd->add_option("--t0", args.t0, "override scheme.t0");
        cmd->add_option("--tol", args.tol, "override scheme.tol");
    };

    CLI::App* price = app.add_subcommand("price", "scheme and weighted-MC prices");
    add_common(price);
    CLI::App* greeks = app.add_subcommand("greeks", "naive, controlled and FD deltas");
    add_common(greeks);
    greeks->add_option("--coords", args.coords, "1-based coordinates (default: all)");
    CLI::App* series = app.add_subcommand("series-study", "term norms and contraction ratios");
    add_common(series);
    CLI::App* order = app.add_subcommand("order-study", "Euler strong-order table");
    add_common(order);
    CLI::App* rank = app.add_subcommand("rank", "bracket ranks and invariant subspace");
    add_common(rank);

    CLI11_PARSE(app, argc, argv);

    try {
        if (price->parsed()) return cmd_price(args);
        if (greeks->parsed()) return cmd_greeks(args);
        if (series->parsed()) return cmd_series_study(args);
        if (order->parsed()) return cmd_order_study(args);
        if (rank->parsed()) return cmd_rank(args);
    } catch (const config_error& err) {
        std::cerr << "validation error: " << err.what() << "\n";
        return kExitValidation;
    } catch (const std::invalid_argument& err) {
        std::cerr << "validation error: " << err.what() << "\n";
        return kExitValidation;
    } catch (const numerical_error& err) {
        std::cerr << "numerical failure: " << err.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 4;
    }
    return 0;
}
