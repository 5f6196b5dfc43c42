#pragma once

#include <functional>
#include <string>

#include "sedi/models.hpp"

namespace sedi {

/// Terminal data with the regularity split the scheme relies on: rough in the
/// diffusion coordinates is fine, smoothness in the complement coordinates is
/// required, and growth must stay below C exp(C |x|).
struct Payoff {
    ScalarFieldFn f;
    bool smooth_complement = true;
    double growth_C = 1.0;
    /// Optional analytic gradient in coordinates d+1..n (size n-d).
    std::function<VectorXd(const VectorXd&)> gradient_complement;
    std::string kind;

    struct AssumptionReport {
        bool local_integrability = false;  ///< (i): finite on the diffusion subspace
        bool complement_smooth = false;    ///< (ii): smooth in coordinates d+1..n
        bool growth_bound = false;         ///< (iii): |f| <= C exp(C |x|)
        bool ok() const { return local_integrability && complement_smooth && growth_bound; }
        std::string describe() const;
    };

    /// Machine check of the three terminal-data conditions for a given model.
    AssumptionReport check_assumptions(const BlockSDE& model, double box_half_width = 3.0,
                                       int samples = 256, unsigned seed = 777u) const;

    /// Gradient in the complement coordinates: analytic when provided,
    /// otherwise central differences (valid where the payoff is smooth).
    VectorXd complement_gradient_at(const VectorXd& x, int d) const;
};

/// max(L_i - L_j, 0) in the model's rate coordinates. Flagged as violating the
/// complement-smoothness condition when the kink surface varies with the
/// drift-only coordinates (the reduced-model failure mode).
Payoff spread_option(const BlockSDE& model, int i, int j);

/// c (L_i - L_j) in the model's rate coordinates; smooth everywhere.
Payoff linear_spread(const BlockSDE& model, int i, int j, double c);

/// Checks the sampled growth bound |f| <= C exp(C |x|); throws on violation.
void validate_payoff(const Payoff& payoff, int n, double box_half_width = 3.0, int samples = 256,
                     unsigned seed = 991u);

/// A model/payoff pair with bounded data: payoff multiplied by exp(-d(x)),
/// drift and potential adjusted accordingly, d(x) = sqrt(a + q |x|^2).
/// Values of the original problem are read back as u = exp(d(x)) * u~.
struct TransformedProblem {
    BlockSDE model;
    Payoff payoff;
    double a = 1.0;
    double q = 2.0;

    double decay(const VectorXd& x) const;                       ///< d(x)
    double read_back(const VectorXd& x, double transformed) const;  ///< exp(d(x)) * value
};

/// Exponential transform making growing payoffs bounded. Pass q = 0 to use
/// the default 2 max(C^2, 1); requires q > growth_C^2.
TransformedProblem exp_transform(const BlockSDE& model, const Payoff& payoff, double a = 1.0,
                                 double q = 0.0);

/// Payoff from a small expression grammar: binary + - * /, max(a,b), exp(a),
/// log(a), numeric literals, and coordinate references x1..xN.
Payoff payoff_from_expression(const std::string& expression, int n, double growth_C = 2.0,
                              bool smooth_complement = true);

}  // namespace sedi
