#pragma once

#include <stdexcept>
#include <string>

namespace sedi {

/// Numerical failure during a computation: ODE blow-up, series divergence,
/// singular diffusion block, non-finite values on quadrature nodes.
class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or input file content.
class config_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace sedi
