#pragma once

#include "bundlecodec/tensor.hpp"

#include <cstdint>

namespace bundlecodec::diff {

// Bias-corrected Adam. Moments are kept per parameter tensor, aligned with
// the parameter list order; t starts at 0 and increments once per step.
struct AdamState {
    double lr = 1e-3;
    double b1 = 0.9;
    double b2 = 0.999;
    double eps = 1e-8;
    std::uint64_t t = 0;
    std::vector<std::vector<double>> m, v;

    void init(const std::vector<Tensor>& params);
    bool initialized() const { return !m.empty(); }
};

// In-place update from params[i].grad(). Deterministic: plain elementwise
// arithmetic in index order.
void adam_step(std::vector<Tensor>& params, AdamState& state);

} // namespace bundlecodec::diff
