#include "bundlecodec/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace bundlecodec::diff {

void AdamState::init(const std::vector<Tensor>& params) {
    m.clear();
    v.clear();
    for (const Tensor& p : params) {
        m.emplace_back(p.size(), 0.0);
        v.emplace_back(p.size(), 0.0);
    }
    t = 0;
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
    if (!state.initialized()) state.init(params);
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: state holds " + std::to_string(state.m.size()) +
                                    " moment buffers for " + std::to_string(params.size()) +
                                    " parameters");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.b1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.b2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        if (state.m[i].size() != p.size())
            throw std::invalid_argument("adam_step: moment shape mismatch at parameter " +
                                        std::to_string(i));
        const auto& g = p.grad(); // zeros if nothing flowed
        auto& m = state.m[i];
        auto& v = state.v[i];
        double* pd = p.data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = state.b1 * m[j] + (1.0 - state.b1) * g[j];
            v[j] = state.b2 * v[j] + (1.0 - state.b2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            pd[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

} // namespace bundlecodec::diff
