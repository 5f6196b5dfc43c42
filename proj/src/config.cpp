#include "sedi/config.hpp"

#include <fstream>
#include <sstream>

#include "sedi/errors.hpp"

namespace sedi {

namespace {

using nlohmann::json;

const json& require(const json& node, const std::string& key, const std::string& path) {
    if (!node.is_object() || !node.contains(key))
        throw config_error("config: missing key: " + (path.empty() ? key : path + "." + key));
    return node.at(key);
}

double require_number(const json& node, const std::string& key, const std::string& path) {
    const json& v = require(node, key, path);
    if (!v.is_number())
        throw config_error("config: key is not a number: " + (path.empty() ? key : path + "." + key));
    return v.get<double>();
}

std::string require_string(const json& node, const std::string& key, const std::string& path) {
    const json& v = require(node, key, path);
    if (!v.is_string())
        throw config_error("config: key is not a string: " + (path.empty() ? key : path + "." + key));
    return v.get<std::string>();
}

double number_or(const json& node, const std::string& key, double fallback) {
    if (!node.is_object() || !node.contains(key)) return fallback;
    return node.at(key).get<double>();
}

VectorXd vector_from(const json& array, const std::string& path) {
    if (!array.is_array()) throw config_error("config: expected an array at " + path);
    VectorXd out(array.size());
    for (std::size_t i = 0; i < array.size(); ++i) {
        if (!array[i].is_number()) throw config_error("config: non-numeric entry in " + path);
        out[static_cast<int>(i)] = array[i].get<double>();
    }
    return out;
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open file: " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return from_json_text(text.str());
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    RunConfig config;
    try {
        config.doc = json::parse(text);
    } catch (const json::parse_error& err) {
        throw config_error(std::string("config: JSON parse failure: ") + err.what());
    }
    if (!config.doc.is_object()) throw config_error("config: top level must be an object");
    return config;
}

std::string RunConfig::to_json_text() const { return doc.dump(2); }

BlockSDE RunConfig::build_model() const {
    const json& model = require(doc, "model", "");
    const std::string kind = require_string(model, "kind", "model");
    try {
        if (kind == "toy") {
            return make_toy_model(require_number(model, "sigma", "model"),
                                  require_number(model, "mu", "model"));
        }
        if (kind == "reduced_lmm") {
            const json& tenors_json = require(model, "tenors", "model");
            if (!tenors_json.is_array()) throw config_error("config: model.tenors must be an array");
            std::vector<double> tenors;
            for (const auto& t : tenors_json) tenors.push_back(t.get<double>());
            const json& loading = require(model, "loading", "model");
            if (!loading.is_array() || loading.empty())
                throw config_error("config: model.loading must be a nonempty array of rows");
            const std::size_t cols = loading[0].size();
            MatrixXd F(loading.size(), cols);
            for (std::size_t r = 0; r < loading.size(); ++r) {
                if (!loading[r].is_array() || loading[r].size() != cols)
                    throw config_error("config: model.loading rows must share one length");
                for (std::size_t c = 0; c < cols; ++c) F(static_cast<int>(r), static_cast<int>(c)) = loading[r][c].get<double>();
            }
            const VectorXd rates = vector_from(require(model, "initial_rates", "model"), "model.initial_rates");
            return make_reduced_lmm(tenors, F, rates);
        }
        if (kind == "cheyette") {
            const double kappa = require_number(model, "kappa", "model");
            const double eta = require_number(model, "eta", "model");
            const double horizon = number_or(model, "horizon", 1.0);
            return make_cheyette([kappa](double) { return kappa; }, [eta](double) { return eta; },
                                 horizon);
        }
        if (kind == "heston") {
            return make_heston(require_number(model, "mu", "model"),
                               require_number(model, "kappa", "model"),
                               require_number(model, "theta", "model"),
                               require_number(model, "xi", "model"),
                               require_number(model, "rho", "model"));
        }
    } catch (const std::invalid_argument& err) {
        throw config_error(std::string("config: model: ") + err.what());
    }
    throw config_error("config: unknown model.kind: " + kind);
}

VectorXd RunConfig::initial_state(const BlockSDE& model) const {
    if (doc.contains("initial_state")) {
        const VectorXd x0 = vector_from(doc.at("initial_state"), "initial_state");
        if (x0.size() != model.n) throw config_error("config: initial_state dimension mismatch");
        return x0;
    }
    if (model.kind == "reduced_lmm") {
        const json& m = doc.at("model");
        const json& loading = m.at("loading");
        MatrixXd F(loading.size(), loading[0].size());
        for (std::size_t r = 0; r < loading.size(); ++r)
            for (std::size_t c = 0; c < loading[r].size(); ++c)
                F(static_cast<int>(r), static_cast<int>(c)) = loading[r][c].get<double>();
        return reduced_lmm_state(F, vector_from(m.at("initial_rates"), "model.initial_rates"));
    }
    return VectorXd::Zero(model.n);
}

Payoff RunConfig::build_payoff(const BlockSDE& model) const {
    const json& payoff = require(doc, "payoff", "");
    const std::string kind = require_string(payoff, "kind", "payoff");
    try {
        if (kind == "expr") {
            const std::string expr = require_string(payoff, "expr", "payoff");
            Payoff p = payoff_from_expression(expr, model.n, number_or(payoff, "growth_c", 2.0),
                                              !payoff.contains("smooth_complement") ||
                                                  payoff.at("smooth_complement").get<bool>());
            validate_payoff(p, model.n);
            return p;
        }
        if (kind == "spread_option" || kind == "linear_spread") {
            const int i = static_cast<int>(require_number(payoff, "i", "payoff")) - 1;
            const int j = static_cast<int>(require_number(payoff, "j", "payoff")) - 1;
            if (kind == "spread_option") return spread_option(model, i, j);
            return linear_spread(model, i, j, number_or(payoff, "c", 1.0));
        }
    } catch (const std::invalid_argument& err) {
        throw config_error(std::string("config: payoff: ") + err.what());
    }
    throw config_error("config: unknown payoff.kind: " + kind);
}

double RunConfig::horizon() const {
    const double T = require_number(doc, "horizon", "");
    if (T < 0.0) throw config_error("config: horizon must be >= 0");
    return T;
}

SchemeConfig RunConfig::scheme() const {
    SchemeConfig out;
    if (!doc.contains("scheme")) return out;
    const json& s = doc.at("scheme");
    out.rho = number_or(s, "rho", out.rho);
    if (!(out.rho > 0.0) || out.rho > 1.0) throw config_error("config: scheme.rho must lie in (0, 1]");
    out.t0 = number_or(s, "t0", out.t0);
    if (out.t0 < 0.0) throw config_error("config: scheme.t0 must be >= 0");
    out.steps = static_cast<int>(number_or(s, "steps", out.steps));
    if (out.steps < 1) throw config_error("config: scheme.steps must be >= 1");
    out.l_max = static_cast<int>(number_or(s, "l_max", out.l_max));
    if (out.l_max < 1) throw config_error("config: scheme.l_max must be >= 1");
    out.tol = number_or(s, "tol", out.tol);
    if (out.tol < 0.0) throw config_error("config: scheme.tol must be >= 0");
    if (s.contains("rho_candidates")) {
        for (const auto& r : s.at("rho_candidates")) {
            const double rho = r.get<double>();
            if (!(rho > 0.0) || rho > 1.0)
                throw config_error("config: scheme.rho_candidates entries must lie in (0, 1]");
            out.rho_candidates.push_back(rho);
        }
    }
    if (s.contains("grid")) {
        const json& g = s.at("grid");
        out.grid.diffusion_nodes = static_cast<int>(number_or(g, "diffusion_nodes", out.grid.diffusion_nodes));
        out.grid.complement_nodes = static_cast<int>(number_or(g, "complement_nodes", out.grid.complement_nodes));
        out.grid.diffusion_sds = number_or(g, "diffusion_sds", out.grid.diffusion_sds);
        out.grid.time_intervals = static_cast<int>(number_or(g, "time_intervals", out.grid.time_intervals));
        out.grid.quadrature_order = static_cast<int>(number_or(g, "quadrature_order", out.grid.quadrature_order));
        if (out.grid.diffusion_nodes < 5 || out.grid.complement_nodes < 5)
            throw config_error("config: scheme.grid nodes must be >= 5 per coordinate");
        if (out.grid.time_intervals < 2) throw config_error("config: scheme.grid.time_intervals must be >= 2");
        if (out.grid.quadrature_order < 2) throw config_error("config: scheme.grid.quadrature_order must be >= 2");
    }
    return out;
}

McConfig RunConfig::mc() const {
    McConfig out;
    if (!doc.contains("mc")) return out;
    const json& m = doc.at("mc");
    if (m.contains("paths")) {
        const double paths = m.at("paths").get<double>();
        if (!(paths >= 1.0)) throw config_error("config: mc.paths must be >= 1");
        out.paths = static_cast<std::size_t>(paths);
    }
    if (m.contains("seed")) out.seed = m.at("seed").get<std::uint64_t>();
    return out;
}

RankConfig RunConfig::rank() const {
    RankConfig out;
    if (!doc.contains("rank")) return out;
    const json& r = doc.at("rank");
    if (r.contains("points")) {
        for (const auto& p : r.at("points")) {
            std::vector<double> point;
            for (const auto& c : p) point.push_back(c.get<double>());
            out.points.push_back(point);
        }
    }
    out.n_random = static_cast<int>(number_or(r, "n_random", out.n_random));
    if (out.n_random < 1) throw config_error("config: rank.n_random must be >= 1");
    out.depth = static_cast<int>(number_or(r, "depth", out.depth));
    if (out.depth < 0) throw config_error("config: rank.depth must be >= 0");
    out.box = number_or(r, "box", out.box);
    if (!(out.box > 0.0)) throw config_error("config: rank.box must be > 0");
    return out;
}

OrderConfig RunConfig::order() const {
    OrderConfig out;
    if (!doc.contains("order")) return out;
    const json& o = doc.at("order");
    if (o.contains("ladder")) {
        out.ladder.clear();
        for (const auto& s : o.at("ladder")) {
            const int steps = s.get<int>();
            if (steps < 1) throw config_error("config: order.ladder entries must be >= 1");
            out.ladder.push_back(steps);
        }
        if (out.ladder.size() < 3) throw config_error("config: order.ladder needs >= 3 rungs");
    }
    if (o.contains("paths")) {
        const double paths = o.at("paths").get<double>();
        if (!(paths >= 1.0)) throw config_error("config: order.paths must be >= 1");
        out.paths = static_cast<std::size_t>(paths);
    }
    out.mu = number_or(o, "mu", out.mu);
    out.sigma = number_or(o, "sigma", out.sigma);
    if (out.sigma < 0.0) throw config_error("config: order.sigma must be >= 0");
    out.x0 = number_or(o, "x0", out.x0);
    out.horizon = number_or(o, "horizon", out.horizon);
    if (!(out.horizon > 0.0)) throw config_error("config: order.horizon must be > 0");
    return out;
}

std::vector<int> RunConfig::greek_coords(const BlockSDE& model) const {
    std::vector<int> coords;
    if (doc.contains("greeks") && doc.at("greeks").contains("coords")) {
        for (const auto& c : doc.at("greeks").at("coords")) {
            const int coord = c.get<int>() - 1;
            if (coord < 0 || coord >= model.n)
                throw config_error("config: greeks.coords entry out of range");
            coords.push_back(coord);
        }
    } else {
        for (int i = 0; i < model.n; ++i) coords.push_back(i);
    }
    return coords;
}

std::string RunConfig::output() const {
    if (!doc.contains("output")) return "";
    return doc.at("output").get<std::string>();
}

void RunConfig::validate() const {
    const BlockSDE model = build_model();
    initial_state(model);
    build_payoff(model);
    horizon();
    scheme();
    mc();
    rank();
    order();
    output();
}

}  // namespace sedi
