#pragma once

#include <vector>

namespace calderon {

struct GaussRule {
    std::vector<double> nodes;    // on [0, 1]
    std::vector<double> weights;  // sum to 1
};

/// n-point Gauss-Legendre rule mapped to [0, 1]. Rules are cached per n.
const GaussRule& gauss_legendre(int n);

}  // namespace calderon
