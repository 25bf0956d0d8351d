// Rough throughput probe for the training hot path: residual-block sized
// conv1d forward+backward at the production batch shape.
#include "bundlecodec/ops.hpp"
#include "bundlecodec/rng.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>

using namespace bundlecodec::diff;

int main(int argc, char** argv) {
    const int threads_arg = argc > 1 ? std::atoi(argv[1]) : 1;
    const int iters = argc > 2 ? std::atoi(argv[2]) : 10;
    set_threads(threads_arg);

    Rng rng(1);
    const int N = 1024, C = 32, L = 64, K = 3;
    Tensor x = Tensor::zeros({N, C, L}, true);
    Tensor w = Tensor::zeros({C, C, K}, true);
    Tensor b = Tensor::zeros({C}, true);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform_range(-1, 1);
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform_range(-1, 1);

    const double flops_fwd = 2.0 * N * C * C * K * L;
    const double flops_tot = 3.0 * flops_fwd; // fwd + grad-x + grad-w

    // warmup
    {
        Tape t;
        Tensor y = conv1d(t, x, w, b, 1, 1);
        Tensor l = mse_loss(t, y, Tensor::zeros(y.shape()));
        t.backward(l);
    }

    auto t0 = std::chrono::steady_clock::now();
    double sink = 0;
    for (int i = 0; i < iters; ++i) {
        Tape t;
        Tensor y = conv1d(t, x, w, b, 1, 1);
        Tensor l = mse_loss(t, y, Tensor::zeros(y.shape()));
        t.backward(l);
        sink += l.value();
        x.zero_grad();
        w.zero_grad();
        b.zero_grad();
    }
    auto t1 = std::chrono::steady_clock::now();
    const double sec = std::chrono::duration<double>(t1 - t0).count() / iters;
    std::printf("conv1d 32x32 K3 L64 N1024, threads=%d: %.1f ms/iter, %.2f Gflop/s (sink %.3f)\n",
                threads_arg, sec * 1e3, flops_tot / sec / 1e9, sink);
    return 0;
}
