#pragma once

#include "bundlecodec/tensor.hpp"

#include <functional>

namespace bundlecodec::diff {

struct GradCheckReport {
    double max_rel_err = 0.0;
    bool pass = false;
    std::size_t checked = 0; // coordinates compared
};

// Scalar-valued function of the given leaves, rebuilt on the supplied tape
// every call. Must be deterministic (freeze any sampled noise in the closure).
using ScalarFn = std::function<Tensor(Tape&, std::vector<Tensor>&)>;

// Compares reverse-mode gradients against central finite differences,
// coordinate by coordinate: rel_err = |a - n| / max(1e-8, |a| + |n|).
// max_coords_per_tensor = 0 checks every coordinate; a positive value checks
// that many per tensor at evenly strided flat indices.
GradCheckReport grad_check(const ScalarFn& f, std::vector<Tensor> point, double step = 1e-5,
                           double tol = 1e-4, std::size_t max_coords_per_tensor = 0);

} // namespace bundlecodec::diff
