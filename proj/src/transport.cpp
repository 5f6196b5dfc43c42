#include "sedi/transport.hpp"

#include <cmath>
#include <sstream>

#include "sedi/errors.hpp"
#include "sedi/quadrature.hpp"

namespace sedi {

namespace {

VectorXd rk4_march(const ComplementFieldFn& field, VectorXd y, double from, double to,
                   double max_step) {
    const double span = to - from;
    if (span == 0.0) return y;
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(span) / max_step)));
    const double h = span / steps;
    for (int k = 0; k < steps; ++k) {
        const VectorXd k1 = field(y);
        const VectorXd k2 = field(y + 0.5 * h * k1);
        const VectorXd k3 = field(y + 0.5 * h * k2);
        const VectorXd k4 = field(y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!y.allFinite()) {
            std::ostringstream msg;
            msg << "flow: non-finite state at t = " << from + (k + 1) * h;
            throw numerical_error(msg.str());
        }
    }
    return y;
}

}  // namespace

VectorXd Flow::at(const VectorXd& x, double t) const { return rk4_march(field, x, 0.0, t, max_step); }

std::vector<VectorXd> Flow::table(const VectorXd& x, double t, int slices) const {
    std::vector<VectorXd> states;
    states.reserve(static_cast<std::size_t>(slices) + 1);
    states.push_back(x);
    VectorXd y = x;
    for (int j = 1; j <= slices; ++j) {
        y = rk4_march(field, y, t * (j - 1) / slices, t * j / slices, max_step);
        states.push_back(y);
    }
    return states;
}

VectorXd flow(const ComplementFieldFn& field, const VectorXd& x, double t, double max_step) {
    return rk4_march(field, x, 0.0, t, max_step);
}

double solve_transport(const ComplementFieldFn& field,
                       const std::function<double(const VectorXd&)>& f,
                       const std::function<double(double, const VectorXd&)>& g, double t,
                       const VectorXd& x, double max_step) {
    if (t == 0.0) return f(x) ;
    const int steps = std::max(2, static_cast<int>(std::ceil(std::abs(t) / max_step)));
    const double h = t / steps;

    // March once, keeping every substep: traj[k] = F^{k h} x.
    std::vector<VectorXd> traj;
    traj.reserve(static_cast<std::size_t>(steps) + 1);
    traj.push_back(x);
    VectorXd y = x;
    for (int k = 1; k <= steps; ++k) {
        y = rk4_march(field, y, (k - 1) * h, k * h, max_step);
        traj.push_back(y);
    }

    double homogeneous = f(traj.back());
    if (!g) return homogeneous;

    // g(s_k, F^{t - s_k} x) with s_k = k h; F^{t - s_k} x = traj[steps - k].
    std::vector<double> integrand(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k)
        integrand[static_cast<std::size_t>(k)] = g(k * h, traj[static_cast<std::size_t>(steps - k)]);
    return homogeneous + simpson_uniform(integrand, h);
}

ComplementFieldFn complement_flow_field(const BlockSDE& model, const VectorXd& x_diffusion) {
    const int n = model.n;
    const int d = model.d;
    const BlockSDE m = model;
    const VectorXd xd = x_diffusion;
    return [m, xd, n, d](const VectorXd& y) {
        VectorXd full(n);
        full.head(d) = xd;
        full.tail(n - d) = y;
        return VectorXd(m.drift(full).tail(n - d));
    };
}

}  // namespace sedi
