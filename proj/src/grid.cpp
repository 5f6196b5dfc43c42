#include "sedi/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace sedi {

void GridSpec::validate() const {
    if (axes.empty()) throw std::invalid_argument("GridSpec: no axes");
    for (const auto& axis : axes) {
        if (axis.nodes < 5) throw std::invalid_argument("GridSpec: needs >= 5 nodes per coordinate");
        if (!(axis.hi > axis.lo)) throw std::invalid_argument("GridSpec: axis bounds must satisfy lo < hi");
        if (!std::isfinite(axis.lo) || !std::isfinite(axis.hi))
            throw std::invalid_argument("GridSpec: non-finite axis bounds");
    }
}

GridSpec GridSpec::auto_box(const BlockSDE& model, const VectorXd& center, double horizon,
                            int diffusion_nodes, int complement_nodes, double diffusion_sds) {
    GridSpec spec;
    const MatrixXd a = model.diffusion_matrix(center);
    const VectorXd b = model.drift(center);
    for (int i = 0; i < model.d; ++i) {
        const double sd = std::sqrt(std::max(a(i, i), 1e-12) * std::max(horizon, 1e-12));
        const double drift_span = std::abs(b[i]) * horizon;
        const double half = diffusion_sds * sd + drift_span + 1e-3;
        spec.axes.push_back({center[i] - half, center[i] + half, diffusion_nodes});
    }
    for (int i = model.d; i < model.n; ++i) {
        const double drift_span = std::abs(b[i]) * horizon;
        const double half = std::max(1.0, 2.0 * drift_span) + drift_span;
        spec.axes.push_back({center[i] - half, center[i] + half, complement_nodes});
    }
    spec.validate();
    return spec;
}

TensorGrid::TensorGrid(GridSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    const int dim = spec_.dim();
    strides_.assign(static_cast<std::size_t>(dim), 1);
    size_ = 1;
    for (int axis = dim - 1; axis >= 0; --axis) {
        strides_[static_cast<std::size_t>(axis)] = size_;
        size_ *= static_cast<std::size_t>(spec_.axes[static_cast<std::size_t>(axis)].nodes);
    }
}

std::vector<int> TensorGrid::indices(std::size_t flat) const {
    std::vector<int> idx(static_cast<std::size_t>(dim()));
    for (int axis = 0; axis < dim(); ++axis) {
        idx[static_cast<std::size_t>(axis)] =
            static_cast<int>((flat / strides_[static_cast<std::size_t>(axis)]) %
                             static_cast<std::size_t>(spec_.axes[static_cast<std::size_t>(axis)].nodes));
    }
    return idx;
}

VectorXd TensorGrid::point(std::size_t flat) const {
    const std::vector<int> idx = indices(flat);
    VectorXd x(dim());
    for (int axis = 0; axis < dim(); ++axis)
        x[axis] = spec_.axes[static_cast<std::size_t>(axis)].coord(idx[static_cast<std::size_t>(axis)]);
    return x;
}

double TensorGrid::interpolate(const std::vector<double>& values, const VectorXd& x) const {
    const int nd = dim();
    // Cell index and weight per axis, clamped to the box.
    std::vector<int> base(static_cast<std::size_t>(nd));
    std::vector<double> frac(static_cast<std::size_t>(nd));
    for (int axis = 0; axis < nd; ++axis) {
        const GridAxis& ax = spec_.axes[static_cast<std::size_t>(axis)];
        double u = (x[axis] - ax.lo) / ax.h();
        if (u <= 0.0) {
            base[static_cast<std::size_t>(axis)] = 0;
            frac[static_cast<std::size_t>(axis)] = 0.0;
        } else if (u >= ax.nodes - 1) {
            base[static_cast<std::size_t>(axis)] = ax.nodes - 2;
            frac[static_cast<std::size_t>(axis)] = 1.0;
        } else {
            int cell = static_cast<int>(u);
            if (cell > ax.nodes - 2) cell = ax.nodes - 2;
            base[static_cast<std::size_t>(axis)] = cell;
            frac[static_cast<std::size_t>(axis)] = u - cell;
        }
    }
    double acc = 0.0;
    const int corners = 1 << nd;
    for (int corner = 0; corner < corners; ++corner) {
        double w = 1.0;
        std::size_t flat = 0;
        for (int axis = 0; axis < nd; ++axis) {
            const int bit = (corner >> axis) & 1;
            w *= bit ? frac[static_cast<std::size_t>(axis)] : 1.0 - frac[static_cast<std::size_t>(axis)];
            flat += strides_[static_cast<std::size_t>(axis)] *
                    static_cast<std::size_t>(base[static_cast<std::size_t>(axis)] + bit);
        }
        if (w != 0.0) acc += w * values[flat];
    }
    return acc;
}

std::vector<double> TensorGrid::derivative(const std::vector<double>& values, int axis) const {
    const GridAxis& ax = spec_.axes[static_cast<std::size_t>(axis)];
    const double h = ax.h();
    const std::size_t stride = strides_[static_cast<std::size_t>(axis)];
    std::vector<double> out(size_);
    for (std::size_t flat = 0; flat < size_; ++flat) {
        const int i = static_cast<int>((flat / stride) % static_cast<std::size_t>(ax.nodes));
        if (i == 0) {
            out[flat] = (-3.0 * values[flat] + 4.0 * values[flat + stride] - values[flat + 2 * stride]) /
                        (2.0 * h);
        } else if (i == ax.nodes - 1) {
            out[flat] = (3.0 * values[flat] - 4.0 * values[flat - stride] + values[flat - 2 * stride]) /
                        (2.0 * h);
        } else {
            out[flat] = (values[flat + stride] - values[flat - stride]) / (2.0 * h);
        }
    }
    return out;
}

std::vector<double> TensorGrid::second_derivative(const std::vector<double>& values, int axis) const {
    const GridAxis& ax = spec_.axes[static_cast<std::size_t>(axis)];
    const double h2 = ax.h() * ax.h();
    const std::size_t stride = strides_[static_cast<std::size_t>(axis)];
    std::vector<double> out(size_);
    for (std::size_t flat = 0; flat < size_; ++flat) {
        const int i = static_cast<int>((flat / stride) % static_cast<std::size_t>(ax.nodes));
        if (i == 0) {
            out[flat] = (2.0 * values[flat] - 5.0 * values[flat + stride] +
                         4.0 * values[flat + 2 * stride] - values[flat + 3 * stride]) /
                        h2;
        } else if (i == ax.nodes - 1) {
            out[flat] = (2.0 * values[flat] - 5.0 * values[flat - stride] +
                         4.0 * values[flat - 2 * stride] - values[flat - 3 * stride]) /
                        h2;
        } else {
            out[flat] = (values[flat + stride] - 2.0 * values[flat] + values[flat - stride]) / h2;
        }
    }
    return out;
}

std::vector<double> TensorGrid::mixed_derivative(const std::vector<double>& values, int a, int b) const {
    if (a == b) return second_derivative(values, a);
    return derivative(derivative(values, a), b);
}

}  // namespace sedi
