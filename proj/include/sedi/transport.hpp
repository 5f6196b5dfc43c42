#pragma once

#include <functional>
#include <vector>

#include "sedi/models.hpp"

namespace sedi {

using ComplementFieldFn = std::function<VectorXd(const VectorXd&)>;

/// Characteristic flow F^t of a complement vector field (diffusion
/// coordinates frozen as parameters). Classical 4th-order one-step
/// integration with fixed substeps; no adaptive control.
struct Flow {
    ComplementFieldFn field;
    double max_step = 1e-3;

    /// F^t x; negative t integrates the reversed field.
    VectorXd at(const VectorXd& x, double t) const;

    /// States F^{t j / slices} x for j = 0..slices.
    std::vector<VectorXd> table(const VectorXd& x, double t, int slices) const;
};

/// F^t x for a one-off call.
VectorXd flow(const ComplementFieldFn& field, const VectorXd& x, double t, double max_step = 1e-3);

/// Duhamel solution of u_t = B . grad u + g with u(0) = f:
///   f(F^t x) + ∫_0^t g(s, F^{t-s} x) ds,
/// the time integral on the same substep grid as the flow.
double solve_transport(const ComplementFieldFn& field,
                       const std::function<double(const VectorXd&)>& f,
                       const std::function<double(double, const VectorXd&)>& g, double t,
                       const VectorXd& x, double max_step = 1e-3);

/// Complement flow field of a model with the diffusion coordinates frozen.
ComplementFieldFn complement_flow_field(const BlockSDE& model, const VectorXd& x_diffusion);

}  // namespace sedi
