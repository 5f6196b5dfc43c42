#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sedi/models.hpp"
#include "sedi/payoffs.hpp"

namespace sedi {

struct GridConfig {
    int diffusion_nodes = 41;
    int complement_nodes = 21;
    double diffusion_sds = 5.0;
    int time_intervals = 8;
    int quadrature_order = 20;
};

struct SchemeConfig {
    double rho = 1.0;
    std::vector<double> rho_candidates;
    double t0 = 0.0;  ///< 0 derives T / (steps * rho)
    int steps = 1;
    int l_max = 3;
    double tol = 1e-8;
    GridConfig grid;
};

struct McConfig {
    std::size_t paths = 100000;
    std::uint64_t seed = 42;
};

struct RankConfig {
    std::vector<std::vector<double>> points;  ///< explicit points; empty = sample
    int n_random = 10;
    int depth = 0;
    double box = 1.0;
};

struct OrderConfig {
    std::vector<int> ladder{8, 16, 32, 64, 128};
    std::size_t paths = 10000;
    double mu = 0.06;
    double sigma = 0.3;
    double x0 = 1.0;
    double horizon = 1.0;
};

/// Batch run description loaded from a JSON config file. The raw document is
/// kept so configs round-trip bit-faithfully; accessors validate against the
/// module preconditions and name the offending key on failure.
struct RunConfig {
    nlohmann::json doc;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_json_text(const std::string& text);
    std::string to_json_text() const;

    /// Full validation pass; throws config_error naming the first bad key.
    void validate() const;

    BlockSDE build_model() const;
    VectorXd initial_state(const BlockSDE& model) const;
    Payoff build_payoff(const BlockSDE& model) const;
    double horizon() const;
    SchemeConfig scheme() const;
    McConfig mc() const;
    RankConfig rank() const;
    OrderConfig order() const;
    std::vector<int> greek_coords(const BlockSDE& model) const;
    std::string output() const;
};

}  // namespace sedi
