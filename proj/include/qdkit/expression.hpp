#pragma once

#include <string_view>

#include "qdkit/polynomial.hpp"

namespace qd {

/// Parses sums/products/powers of complex constants and the variable z,
/// e.g. "z^2 - 1", "(z-1)*(z+2i)", "2.5 z^3 + 1e-2". Throws InvalidInput.
Polynomial parse_polynomial_expression(std::string_view text);

}  // namespace qd
