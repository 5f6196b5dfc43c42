#pragma once

#include <cstddef>
#include <vector>

#include "sedi/models.hpp"

namespace sedi {

struct GridAxis {
    double lo = 0.0;
    double hi = 0.0;
    int nodes = 0;
    double h() const { return (hi - lo) / (nodes - 1); }
    double coord(int i) const { return lo + i * h(); }
};

/// Tensor box for the series scheme: one axis per state coordinate, first d
/// diffusion axes, then the complement axes. Needs >= 5 nodes per axis for
/// the second-order stencils.
struct GridSpec {
    std::vector<GridAxis> axes;

    int dim() const { return static_cast<int>(axes.size()); }
    void validate() const;

    /// Box centered at `center`: diffusion axes sized to `diffusion_sds`
    /// standard deviations over the horizon plus the drift displacement,
    /// complement axes to the flow displacement plus a unit margin.
    static GridSpec auto_box(const BlockSDE& model, const VectorXd& center, double horizon,
                             int diffusion_nodes = 41, int complement_nodes = 21,
                             double diffusion_sds = 5.0);
};

/// Node enumeration, clamped multilinear interpolation, and second-order
/// difference stencils on a GridSpec. Values are flat arrays in row-major
/// node order (first axis slowest).
class TensorGrid {
public:
    explicit TensorGrid(GridSpec spec);

    const GridSpec& spec() const { return spec_; }
    std::size_t size() const { return size_; }
    int dim() const { return static_cast<int>(spec_.axes.size()); }

    VectorXd point(std::size_t flat) const;
    std::vector<int> indices(std::size_t flat) const;

    /// Multilinear interpolation; coordinates outside the box are clamped
    /// (constant extrapolation of boundary values).
    double interpolate(const std::vector<double>& values, const VectorXd& x) const;

    /// d/dx_axis by central differences (one-sided second order at edges).
    std::vector<double> derivative(const std::vector<double>& values, int axis) const;
    /// d^2/dx_axis^2.
    std::vector<double> second_derivative(const std::vector<double>& values, int axis) const;
    /// d^2/(dx_a dx_b), a != b, by repeated first-derivative stencils.
    std::vector<double> mixed_derivative(const std::vector<double>& values, int a, int b) const;

private:
    GridSpec spec_;
    std::size_t size_ = 0;
    std::vector<std::size_t> strides_;
};

}  // namespace sedi
