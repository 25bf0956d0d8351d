#include "bundlecodec/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bundlecodec::diff {

namespace {

void finite_check(const char* op, const Tensor& t) {
    if (!debug_finite_checks()) return;
    const double* p = t.data();
    for (std::size_t i = 0; i < t.size(); ++i)
        if (!std::isfinite(p[i]))
            throw std::runtime_error(std::string(op) + ": non-finite value at flat index " +
                                     std::to_string(i));
}

void check_same(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

// Fixed-size chunks processed in parallel; any reduction over chunks happens
// serially in chunk order, so results do not depend on the thread count.
constexpr std::int64_t kChunk = 16;

inline std::int64_t chunk_count(std::int64_t n) { return (n + kChunk - 1) / kChunk; }

template <class Body>
void parallel_chunks(std::int64_t n_items, const Body& body) {
    const std::int64_t nc = chunk_count(n_items);
    const int nt = threads();
    if (nt <= 1 || nc <= 1) {
        for (std::int64_t c = 0; c < nc; ++c)
            body(c, c * kChunk, std::min(n_items, (c + 1) * kChunk));
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::int64_t c = 0; c < nc; ++c)
        body(c, c * kChunk, std::min(n_items, (c + 1) * kChunk));
#else
    for (std::int64_t c = 0; c < nc; ++c)
        body(c, c * kChunk, std::min(n_items, (c + 1) * kChunk));
#endif
}

inline void axpy(double* __restrict y, const double* __restrict x, double a, int n) {
    for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

// Eight fixed accumulator lanes so the reduction vectorizes without
// -ffast-math; the combine order is hard-coded, so results are deterministic.
inline double dot(const double* __restrict a, const double* __restrict b, int n) {
    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int i = 0;
    for (; i + 8 <= n; i += 8)
        for (int j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) +
           tail;
}

} // namespace

// ---------------------------------------------------------------------------
// elementwise

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same("add", a, b);
    Tensor out = Tensor::zeros(a.shape());
    const double *pa = a.data(), *pb = b.data();
    double* po = out.data();
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    finite_check("add", out);
    if (track(tape, a, b)) {
        out.set_requires_grad(true);
        Tensor A = a, B = b, O = out;
        tape.record("add", {a, b}, out, [A, B, O]() mutable {
            const auto& g = O.grad();
            if (A.requires_grad()) {
                auto& ga = A.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (B.requires_grad()) {
                auto& gb = B.grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        });
    }
    return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same("sub", a, b);
    Tensor out = Tensor::zeros(a.shape());
    const double *pa = a.data(), *pb = b.data();
    double* po = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] = pa[i] - pb[i];
    finite_check("sub", out);
    if (track(tape, a, b)) {
        out.set_requires_grad(true);
        Tensor A = a, B = b, O = out;
        tape.record("sub", {a, b}, out, [A, B, O]() mutable {
            const auto& g = O.grad();
            if (A.requires_grad()) {
                auto& ga = A.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (B.requires_grad()) {
                auto& gb = B.grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        });
    }
    return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same("mul", a, b);
    Tensor out = Tensor::zeros(a.shape());
    const double *pa = a.data(), *pb = b.data();
    double* po = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] = pa[i] * pb[i];
    finite_check("mul", out);
    if (track(tape, a, b)) {
        out.set_requires_grad(true);
        Tensor A = a, B = b, O = out;
        tape.record("mul", {a, b}, out, [A, B, O]() mutable {
            const auto& g = O.grad();
            const double *pa = A.data(), *pb = B.data();
            if (A.requires_grad()) {
                auto& ga = A.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * pb[i];
            }
            if (B.requires_grad()) {
                auto& gb = B.grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * pa[i];
            }
        });
    }
    return out;
}

Tensor scale(Tape& tape, const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] = c * pa[i];
    finite_check("scale", out);
    if (track(tape, a)) {
        out.set_requires_grad(true);
        Tensor A = a, O = out;
        tape.record("scale", {a}, out, [A, O, c]() mutable {
            const auto& g = O.grad();
            auto& ga = A.grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
        });
    }
    return out;
}

Tensor add_const(Tape& tape, const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] = pa[i] + c;
    finite_check("add_const", out);
    if (track(tape, a)) {
        out.set_requires_grad(true);
        Tensor A = a, O = out;
        tape.record("add_const", {a}, out, [A, O]() mutable {
            const auto& g = O.grad();
            auto& ga = A.grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
    }
    return out;
}

Tensor relu(Tape& tape, const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] = pa[i] > 0.0 ? pa[i] : 0.0;
    finite_check("relu", out);
    if (track(tape, a)) {
        out.set_requires_grad(true);
        Tensor A = a, O = out;
        tape.record("relu", {a}, out, [A, O]() mutable {
            const auto& g = O.grad();
            const double* pa = A.data();
            auto& ga = A.grad();
            for (std::size_t i = 0; i < g.size(); ++i)
                if (pa[i] > 0.0) ga[i] += g[i];
        });
    }
    return out;
}

Tensor exp_elem(Tape& tape, const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] = std::exp(pa[i]);
    finite_check("exp", out);
    if (track(tape, a)) {
        out.set_requires_grad(true);
        Tensor A = a, O = out;
        tape.record("exp", {a}, out, [A, O]() mutable {
            const auto& g = O.grad();
            const double* po = O.data();
            auto& ga = A.grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * po[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// shape / reductions

Tensor reshape(Tape& tape, const Tensor& a, Shape shape) {
    Tensor out = a.detached().reshaped(std::move(shape));
    if (track(tape, a)) {
        out.set_requires_grad(true);
        Tensor A = a, O = out;
        tape.record("reshape", {a}, out, [A, O]() mutable {
            const auto& g = O.grad();
            auto& ga = A.grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
    }
    return out;
}

Tensor sum(Tape& tape, const Tensor& a) {
    double s = 0.0;
    const double* pa = a.data();
    for (std::size_t i = 0; i < a.size(); ++i) s += pa[i];
    Tensor out = Tensor::scalar(s);
    finite_check("sum", out);
    if (track(tape, a)) {
        out.set_requires_grad(true);
        Tensor A = a, O = out;
        tape.record("sum", {a}, out, [A, O]() mutable {
            const double g = O.grad()[0];
            auto& ga = A.grad();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
        });
    }
    return out;
}

Tensor mean(Tape& tape, const Tensor& a) {
    double s = 0.0;
    const double* pa = a.data();
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) s += pa[i];
    Tensor out = Tensor::scalar(s / static_cast<double>(n));
    finite_check("mean", out);
    if (track(tape, a)) {
        out.set_requires_grad(true);
        Tensor A = a, O = out;
        tape.record("mean", {a}, out, [A, O, n]() mutable {
            const double g = O.grad()[0] / static_cast<double>(n);
            auto& ga = A.grad();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
        });
    }
    return out;
}

Tensor mse_loss(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same("mse_loss", a, b);
    const double *pa = a.data(), *pb = b.data();
    const std::size_t n = a.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pa[i] - pb[i];
        s += d * d;
    }
    Tensor out = Tensor::scalar(s / static_cast<double>(n));
    finite_check("mse_loss", out);
    if (track(tape, a, b)) {
        out.set_requires_grad(true);
        Tensor A = a, B = b, O = out;
        tape.record("mse_loss", {a, b}, out, [A, B, O, n]() mutable {
            const double g = O.grad()[0] * 2.0 / static_cast<double>(n);
            const double *pa = A.data(), *pb = B.data();
            if (A.requires_grad()) {
                auto& ga = A.grad();
                for (std::size_t i = 0; i < n; ++i) ga[i] += g * (pa[i] - pb[i]);
            }
            if (B.requires_grad()) {
                auto& gb = B.grad();
                for (std::size_t i = 0; i < n; ++i) gb[i] -= g * (pa[i] - pb[i]);
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// softmax

Tensor softmax_temp(Tape& tape, const Tensor& logits, double tau) {
    if (!(tau > 0.0))
        throw std::invalid_argument("softmax_temp: tau must be positive, got " +
                                    std::to_string(tau));
    if (logits.ndim() != 1 && logits.ndim() != 2)
        throw std::invalid_argument("softmax_temp: expected 1-D or 2-D logits, got " +
                                    shape_str(logits.shape()));
    const int k = logits.dim(logits.ndim() - 1);
    const std::int64_t rows = static_cast<std::int64_t>(logits.size()) / k;
    Tensor out = Tensor::zeros(logits.shape());
    const double* pl = logits.data();
    double* po = out.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* lr = pl + r * k;
        double* orow = po + r * k;
        double m = lr[0];
        for (int i = 1; i < k; ++i) m = std::max(m, lr[i]);
        double z = 0.0;
        for (int i = 0; i < k; ++i) {
            orow[i] = std::exp((lr[i] - m) / tau);
            z += orow[i];
        }
        const double inv = 1.0 / z;
        for (int i = 0; i < k; ++i) orow[i] *= inv;
    }
    finite_check("softmax_temp", out);
    if (track(tape, logits)) {
        out.set_requires_grad(true);
        Tensor A = logits, O = out;
        tape.record("softmax_temp", {logits}, out, [A, O, rows, k, tau]() mutable {
            const auto& g = O.grad();
            const double* pw = O.data();
            auto& ga = A.grad();
            for (std::int64_t r = 0; r < rows; ++r) {
                const double* wr = pw + r * k;
                const double* gr = g.data() + r * k;
                double dotgw = 0.0;
                for (int i = 0; i < k; ++i) dotgw += gr[i] * wr[i];
                double* gar = ga.data() + r * k;
                for (int i = 0; i < k; ++i) gar[i] += wr[i] * (gr[i] - dotgw) / tau;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// matmul / linear

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2)
        throw std::invalid_argument("matmul: expected 2-D operands, got " + shape_str(a.shape()) +
                                    " and " + shape_str(b.shape()));
    if (a.dim(1) != b.dim(0))
        throw std::invalid_argument("matmul: inner dimensions differ, " + shape_str(a.shape()) +
                                    " x " + shape_str(b.shape()));
    const int m = a.dim(0), kk = a.dim(1), n = b.dim(1);
    Tensor out = Tensor::zeros({m, n});
    {
        const double *pa = a.data(), *pb = b.data();
        double* po = out.data();
        parallel_chunks(m, [&](std::int64_t, std::int64_t r0, std::int64_t r1) {
            for (std::int64_t r = r0; r < r1; ++r) {
                double* orow = po + r * n;
                const double* arow = pa + r * kk;
                for (int j = 0; j < kk; ++j) axpy(orow, pb + static_cast<std::int64_t>(j) * n, arow[j], n);
            }
        });
    }
    finite_check("matmul", out);
    if (track(tape, a, b)) {
        out.set_requires_grad(true);
        Tensor A = a, B = b, O = out;
        tape.record("matmul", {a, b}, out, [A, B, O, m, kk, n]() mutable {
            const auto& g = O.grad();
            const double *pa = A.data(), *pb = B.data();
            if (A.requires_grad()) {
                auto& ga = A.grad();
                parallel_chunks(m, [&](std::int64_t, std::int64_t r0, std::int64_t r1) {
                    for (std::int64_t r = r0; r < r1; ++r) {
                        const double* grow = g.data() + r * n;
                        double* garow = ga.data() + r * kk;
                        for (int j = 0; j < kk; ++j)
                            garow[j] += dot(grow, pb + static_cast<std::int64_t>(j) * n, n);
                    }
                });
            }
            if (B.requires_grad()) {
                // reduction over rows of a: per-chunk partials, combined in order
                const std::int64_t nc = chunk_count(m);
                std::vector<double> partial(static_cast<std::size_t>(nc) * kk * n, 0.0);
                parallel_chunks(m, [&](std::int64_t c, std::int64_t r0, std::int64_t r1) {
                    double* pp = partial.data() + c * kk * n;
                    for (std::int64_t r = r0; r < r1; ++r) {
                        const double* grow = g.data() + r * n;
                        const double* arow = pa + r * kk;
                        for (int j = 0; j < kk; ++j) axpy(pp + static_cast<std::int64_t>(j) * n, grow, arow[j], n);
                    }
                });
                auto& gb = B.grad();
                for (std::int64_t c = 0; c < nc; ++c) {
                    const double* pp = partial.data() + c * kk * n;
                    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += pp[i];
                }
            }
        });
    }
    return out;
}

Tensor matvec(Tape& tape, const Tensor& a, const Tensor& v) {
    if (a.ndim() != 2 || v.ndim() != 1)
        throw std::invalid_argument("matvec: expected [m,n] and [n], got " + shape_str(a.shape()) +
                                    " and " + shape_str(v.shape()));
    if (a.dim(1) != v.dim(0))
        throw std::invalid_argument("matvec: inner dimensions differ, " + shape_str(a.shape()) +
                                    " x " + shape_str(v.shape()));
    Tensor vm = reshape(tape, v, {v.dim(0), 1});
    Tensor out = matmul(tape, a, vm);
    return reshape(tape, out, {a.dim(0)});
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.ndim() != 2 || w.ndim() != 2)
        throw std::invalid_argument("linear: expected x [N,in] and w [out,in], got " +
                                    shape_str(x.shape()) + " and " + shape_str(w.shape()));
    const int N = x.dim(0), in = x.dim(1), outdim = w.dim(0);
    if (w.dim(1) != in)
        throw std::invalid_argument("linear: input width " + std::to_string(in) +
                                    " does not match weight columns " + std::to_string(w.dim(1)));
    if (b.defined() && (b.ndim() != 1 || b.dim(0) != outdim))
        throw std::invalid_argument("linear: bias shape " + shape_str(b.shape()) +
                                    " does not match out width " + std::to_string(outdim));
    Tensor out = Tensor::zeros({N, outdim});
    {
        const double *px = x.data(), *pw = w.data();
        const double* pbias = b.defined() ? b.data() : nullptr;
        double* po = out.data();
        parallel_chunks(N, [&](std::int64_t, std::int64_t n0, std::int64_t n1) {
            for (std::int64_t r = n0; r < n1; ++r) {
                const double* xrow = px + r * in;
                double* orow = po + r * outdim;
                for (int o = 0; o < outdim; ++o)
                    orow[o] = (pbias ? pbias[o] : 0.0) + dot(xrow, pw + static_cast<std::int64_t>(o) * in, in);
            }
        });
    }
    finite_check("linear", out);
    const bool needs = tape.recording() &&
                       (x.requires_grad() || w.requires_grad() || (b.defined() && b.requires_grad()));
    if (needs) {
        out.set_requires_grad(true);
        std::vector<Tensor> ins = {x, w};
        if (b.defined()) ins.push_back(b);
        Tensor X = x, W = w, B = b, O = out;
        tape.record("linear", std::move(ins), out, [X, W, B, O, N, in, outdim]() mutable {
            const auto& g = O.grad();
            const double *px = X.data(), *pw = W.data();
            if (X.requires_grad()) {
                auto& gx = X.grad();
                parallel_chunks(N, [&](std::int64_t, std::int64_t n0, std::int64_t n1) {
                    for (std::int64_t r = n0; r < n1; ++r) {
                        const double* grow = g.data() + r * outdim;
                        double* gxrow = gx.data() + r * in;
                        for (int o = 0; o < outdim; ++o)
                            axpy(gxrow, pw + static_cast<std::int64_t>(o) * in, grow[o], in);
                    }
                });
            }
            const bool needw = W.requires_grad();
            const bool needb = B.defined() && B.requires_grad();
            if (needw || needb) {
                const std::int64_t nc = chunk_count(N);
                const std::size_t wsz = static_cast<std::size_t>(outdim) * in;
                std::vector<double> partial(static_cast<std::size_t>(nc) * (wsz + outdim), 0.0);
                parallel_chunks(N, [&](std::int64_t c, std::int64_t n0, std::int64_t n1) {
                    double* pg = partial.data() + c * (wsz + outdim);
                    double* pgb = pg + wsz;
                    for (std::int64_t r = n0; r < n1; ++r) {
                        const double* grow = g.data() + r * outdim;
                        const double* xrow = px + r * in;
                        for (int o = 0; o < outdim; ++o) {
                            axpy(pg + static_cast<std::int64_t>(o) * in, xrow, grow[o], in);
                            pgb[o] += grow[o];
                        }
                    }
                });
                if (needw) {
                    auto& gw = W.grad();
                    for (std::int64_t c = 0; c < nc; ++c) {
                        const double* pg = partial.data() + c * (wsz + outdim);
                        for (std::size_t i = 0; i < wsz; ++i) gw[i] += pg[i];
                    }
                }
                if (needb) {
                    auto& gb = B.grad();
                    for (std::int64_t c = 0; c < nc; ++c) {
                        const double* pgb = partial.data() + c * (wsz + outdim) + wsz;
                        for (int o = 0; o < outdim; ++o) gb[o] += pgb[o];
                    }
                }
            }
        });
    }
    return out;
}
// ---------------------------------------------------------------------------
// conv1d
//
// Stride-1 and stride-2 paths reduce to two fused correlation kernels with
// the tap count fixed at compile time (dispatched once per call, so the hot
// loops inline with constant K); stride 2 first splits rows into even/odd
// phases so every inner loop runs stride-1 over contiguous memory. Scatter
// patterns are rewritten as correlations with reversed taps over a
// zero-extended source. Other strides take a plain scalar fallback.

namespace {

constexpr int kMaxTaps = 6;

// y[l] += sum_k w[k] * x[l+k]; K == 0 means runtime tap count rk.
template <int K>
inline void corr_add_t(double* __restrict y, const double* __restrict x,
                       const double* __restrict w, int rk, int n) {
    if constexpr (K == 0) {
        for (int l = 0; l < n; ++l) {
            double acc = 0.0;
            for (int k = 0; k < rk; ++k) acc += w[k] * x[l + k];
            y[l] += acc;
        }
    } else {
        (void)rk;
        for (int l = 0; l < n; ++l) {
            double acc = 0.0;
            for (int k = 0; k < K; ++k) acc += w[k] * x[l + k];
            y[l] += acc;
        }
    }
}

// gw[k] += sum_l g[l] * x[l+k]; one 8-lane dot per tap so the reduction
// vectorizes while the combine order stays hard-coded.
template <int K>
inline void corr_dots_t(const double* __restrict g, const double* __restrict x,
                        double* __restrict gw, int rk, int n) {
    if constexpr (K == 0) {
        for (int k = 0; k < rk; ++k) {
            double s = 0.0;
            for (int l = 0; l < n; ++l) s += g[l] * x[l + k];
            gw[k] += s;
        }
    } else {
        (void)rk;
        for (int k = 0; k < K; ++k) gw[k] += dot(g, x + k, n);
    }
}

// Runs f with the tap count as std::integral_constant: known K inlines the
// fast kernels, anything larger falls back to the runtime version (K = 0).
template <class F>
void dispatch_taps(int K, F&& f) {
    switch (K) {
        case 1: f(std::integral_constant<int, 1>{}); break;
        case 2: f(std::integral_constant<int, 2>{}); break;
        case 3: f(std::integral_constant<int, 3>{}); break;
        case 4: f(std::integral_constant<int, 4>{}); break;
        case 5: f(std::integral_constant<int, 5>{}); break;
        case 6: f(std::integral_constant<int, 6>{}); break;
        default: f(std::integral_constant<int, 0>{}); break;
    }
}

struct ConvDims {
    std::int64_t N;
    int Cin, L, Cout, K, stride, pad, Lout;
    bool batched; // input was 3-D
};

ConvDims conv_dims(const char* op, const Tensor& x, const Tensor& w, const Tensor& bias,
                   int stride, int padding, bool transpose) {
    ConvDims d{};
    if (x.ndim() == 2) {
        d.batched = false;
        d.N = 1;
        d.Cin = x.dim(0);
        d.L = x.dim(1);
    } else if (x.ndim() == 3) {
        d.batched = true;
        d.N = x.dim(0);
        d.Cin = x.dim(1);
        d.L = x.dim(2);
    } else {
        throw std::invalid_argument(std::string(op) + ": expected 2-D or 3-D input, got " +
                                    shape_str(x.shape()));
    }
    if (w.ndim() != 3)
        throw std::invalid_argument(std::string(op) + ": expected 3-D weight, got " +
                                    shape_str(w.shape()));
    if (stride < 1)
        throw std::invalid_argument(std::string(op) + ": stride must be >= 1, got " +
                                    std::to_string(stride));
    if (padding < 0)
        throw std::invalid_argument(std::string(op) + ": padding must be >= 0, got " +
                                    std::to_string(padding));
    if (!transpose) {
        d.Cout = w.dim(0);
        if (w.dim(1) != d.Cin)
            throw std::invalid_argument(std::string(op) + ": input channel count " +
                                        std::to_string(d.Cin) + " does not match weight C_in " +
                                        std::to_string(w.dim(1)));
        d.K = w.dim(2);
        if (d.K > d.L + 2 * padding)
            throw std::invalid_argument(std::string(op) + ": kernel size " + std::to_string(d.K) +
                                        " exceeds padded length " +
                                        std::to_string(d.L + 2 * padding));
        d.Lout = (d.L + 2 * padding - d.K) / stride + 1;
    } else {
        if (w.dim(0) != d.Cin)
            throw std::invalid_argument(std::string(op) + ": input channel count " +
                                        std::to_string(d.Cin) + " does not match weight C_in " +
                                        std::to_string(w.dim(0)));
        d.Cout = w.dim(1);
        d.K = w.dim(2);
        d.Lout = (d.L - 1) * stride - 2 * padding + d.K;
        if (d.Lout < 1)
            throw std::invalid_argument(std::string(op) + ": output length " +
                                        std::to_string(d.Lout) + " is not positive");
    }
    if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != d.Cout))
        throw std::invalid_argument(std::string(op) + ": bias shape " + shape_str(bias.shape()) +
                                    " does not match C_out " + std::to_string(d.Cout));
    d.stride = stride;
    d.pad = padding;
    return d;
}

// Zero-pad one sample into scratch: [Cin][L + 2*pad].
inline void pad_sample(const double* x, double* xpad, int Cin, int L, int pad) {
    const int Lp = L + 2 * pad;
    if (pad) std::memset(xpad, 0, sizeof(double) * static_cast<std::size_t>(Cin) * Lp);
    for (int ci = 0; ci < Cin; ++ci)
        std::memcpy(xpad + static_cast<std::int64_t>(ci) * Lp + pad,
                    x + static_cast<std::int64_t>(ci) * L, sizeof(double) * static_cast<std::size_t>(L));
}

// src[2j] -> even[j], src[2j+1] -> odd[j]; both phase rows zero-filled first.
inline void split_phases(const double* src, double* even, double* odd, int n, int ph_len) {
    std::memset(even, 0, sizeof(double) * static_cast<std::size_t>(ph_len));
    std::memset(odd, 0, sizeof(double) * static_cast<std::size_t>(ph_len));
    for (int j = 0; j < n; ++j) (j & 1 ? odd : even)[j >> 1] = src[j];
}

// Taps split by parity (even[a] = w[2a], odd[a] = w[2a+1]) for the stride-2
// phase paths, plus reversed variants for the scatter-as-correlation trick.
struct TapSplit {
    double even[kMaxTaps], odd[kMaxTaps];
    double even_rev[kMaxTaps], odd_rev[kMaxTaps];
    int ne = 0, no = 0;
};
inline TapSplit split_taps(const double* w, int K) {
    TapSplit t;
    for (int k = 0; k < K; ++k)
        (k & 1 ? t.odd[t.no++] : t.even[t.ne++]) = w[k];
    for (int a = 0; a < t.ne; ++a) t.even_rev[a] = t.even[t.ne - 1 - a];
    for (int a = 0; a < t.no; ++a) t.odd_rev[a] = t.odd[t.no - 1 - a];
    return t;
}
inline void reverse_taps(const double* w, int K, double* out) {
    for (int k = 0; k < K; ++k) out[k] = w[K - 1 - k];
}

// Zero-extend a row by (pad_each) on both sides: ext[m] = src[m - pad_each].
inline void extend_row(const double* src, int n, int pad_each, double* ext) {
    std::memset(ext, 0, sizeof(double) * static_cast<std::size_t>(n + 2 * pad_each));
    std::memcpy(ext + pad_each, src, sizeof(double) * static_cast<std::size_t>(n));
}

} // namespace

Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int padding) {
    const ConvDims d = conv_dims("conv1d", x, w, bias, stride, padding, false);
    const int Lp = d.L + 2 * d.pad;
    const int ph_len = Lp / 2 + d.K + 2;
    // fast paths: stride 1 (plain correlation) and stride 2 (phase split)
    const int mode = (d.stride == 1) ? 1 : (d.stride == 2 ? 2 : 0);

    Shape out_shape = d.batched ? Shape{static_cast<int>(d.N), d.Cout, d.Lout}
                                : Shape{d.Cout, d.Lout};
    Tensor out = Tensor::zeros(out_shape);
    {
        const double *px = x.data(), *pw = w.data();
        const double* pb = bias.defined() ? bias.data() : nullptr;
        double* po = out.data();
        dispatch_taps(mode ? d.K : 0, [&](auto kc) {
            constexpr int KC = kc.value;
            constexpr int NE = KC ? (KC + 1) / 2 : 0, NO = KC ? KC / 2 : 0;
            parallel_chunks(d.N, [&, po](std::int64_t, std::int64_t n0, std::int64_t n1) {
                std::vector<double> xpad(static_cast<std::size_t>(d.Cin) * Lp);
                std::vector<double> phases(mode == 2 && KC ? static_cast<std::size_t>(d.Cin) * 2 * ph_len : 0);
                for (std::int64_t n = n0; n < n1; ++n) {
                    pad_sample(px + n * d.Cin * d.L, xpad.data(), d.Cin, d.L, d.pad);
                    if (mode == 2 && KC)
                        for (int ci = 0; ci < d.Cin; ++ci)
                            split_phases(xpad.data() + static_cast<std::int64_t>(ci) * Lp,
                                         phases.data() + static_cast<std::int64_t>(ci) * 2 * ph_len,
                                         phases.data() + static_cast<std::int64_t>(ci) * 2 * ph_len + ph_len,
                                         Lp, ph_len);
                    double* y_n = po + n * d.Cout * d.Lout;
                    for (int co = 0; co < d.Cout; ++co) {
                        double* yrow = y_n + static_cast<std::int64_t>(co) * d.Lout;
                        const double bv = pb ? pb[co] : 0.0;
                        for (int l = 0; l < d.Lout; ++l) yrow[l] = bv;
                        for (int ci = 0; ci < d.Cin; ++ci) {
                            const double* wrow = pw + (static_cast<std::int64_t>(co) * d.Cin + ci) * d.K;
                            if constexpr (KC == 0) {
                                const double* xrow = xpad.data() + static_cast<std::int64_t>(ci) * Lp;
                                for (int k = 0; k < d.K; ++k)
                                    for (int l = 0; l < d.Lout; ++l)
                                        yrow[l] += wrow[k] * xrow[static_cast<std::int64_t>(l) * d.stride + k];
                            } else if (mode == 1) {
                                corr_add_t<KC>(yrow, xpad.data() + static_cast<std::int64_t>(ci) * Lp,
                                               wrow, d.K, d.Lout);
                            } else {
                                const double* ph = phases.data() + static_cast<std::int64_t>(ci) * 2 * ph_len;
                                const TapSplit ts = split_taps(wrow, KC);
                                if (NE) corr_add_t<NE>(yrow, ph, ts.even, NE, d.Lout);
                                if (NO) corr_add_t<NO>(yrow, ph + ph_len, ts.odd, NO, d.Lout);
                            }
                        }
                    }
                }
            });
        });
    }
    finite_check("conv1d", out);

    const bool needs = tape.recording() &&
                       (x.requires_grad() || w.requires_grad() || (bias.defined() && bias.requires_grad()));
    if (needs) {
        out.set_requires_grad(true);
        std::vector<Tensor> ins = {x, w};
        if (bias.defined()) ins.push_back(bias);
        Tensor X = x, W = w, B = bias, O = out;
        const int md = mode;
        tape.record("conv1d", std::move(ins), out, [X, W, B, O, d, Lp, ph_len, md]() mutable {
            const double* pg = O.grad().data();
            const double *px = X.data(), *pw = W.data();

            if (X.requires_grad()) {
                auto& gx = X.grad();
                dispatch_taps(md ? d.K : 0, [&](auto kc) {
                    constexpr int KC = kc.value;
                    constexpr int NE = KC ? (KC + 1) / 2 : 0, NO = KC ? KC / 2 : 0;
                    parallel_chunks(d.N, [&](std::int64_t, std::int64_t n0, std::int64_t n1) {
                        std::vector<double> gxpad(static_cast<std::size_t>(d.Cin) * Lp);
                        std::vector<double> gph(md == 2 && KC ? static_cast<std::size_t>(d.Cin) * 2 * ph_len : 0);
                        std::vector<double> gext(static_cast<std::size_t>(d.Lout) + 2 * d.K + 2);
                        double wrev[kMaxTaps];
                        const int m_even = (Lp + 1) / 2, m_odd = Lp / 2;
                        for (std::int64_t n = n0; n < n1; ++n) {
                            std::fill(gxpad.begin(), gxpad.end(), 0.0);
                            if (!gph.empty()) std::fill(gph.begin(), gph.end(), 0.0);
                            const double* g_n = pg + n * d.Cout * d.Lout;
                            for (int co = 0; co < d.Cout; ++co) {
                                const double* grow = g_n + static_cast<std::int64_t>(co) * d.Lout;
                                if (KC) extend_row(grow, d.Lout, d.K - 1, gext.data());
                                for (int ci = 0; ci < d.Cin; ++ci) {
                                    const double* wrow = pw + (static_cast<std::int64_t>(co) * d.Cin + ci) * d.K;
                                    if constexpr (KC == 0) {
                                        double* dst = gxpad.data() + static_cast<std::int64_t>(ci) * Lp;
                                        for (int k = 0; k < d.K; ++k)
                                            for (int l = 0; l < d.Lout; ++l)
                                                dst[static_cast<std::int64_t>(l) * d.stride + k] += wrow[k] * grow[l];
                                    } else if (md == 1) {
                                        // gxpad[j] += sum_k w[k] g[j-k]: reversed taps over extended g
                                        reverse_taps(wrow, KC, wrev);
                                        corr_add_t<KC>(gxpad.data() + static_cast<std::int64_t>(ci) * Lp,
                                                       gext.data(), wrev, KC, Lp);
                                    } else {
                                        // phase p of gxpad: gph_p[m] += sum_a w[2a+p] g[m-a]
                                        const TapSplit ts = split_taps(wrow, KC);
                                        double* ph = gph.data() + static_cast<std::int64_t>(ci) * 2 * ph_len;
                                        if (NE)
                                            corr_add_t<NE>(ph, gext.data() + (KC - 1) - (NE - 1),
                                                           ts.even_rev, NE, m_even);
                                        if (NO)
                                            corr_add_t<NO>(ph + ph_len, gext.data() + (KC - 1) - (NO - 1),
                                                           ts.odd_rev, NO, m_odd);
                                    }
                                }
                            }
                            if (md == 2 && KC) {
                                for (int ci = 0; ci < d.Cin; ++ci) {
                                    const double* ph = gph.data() + static_cast<std::int64_t>(ci) * 2 * ph_len;
                                    double* dst = gxpad.data() + static_cast<std::int64_t>(ci) * Lp;
                                    for (int j = 0; j < Lp; ++j)
                                        dst[j] += ph[(j & 1 ? ph_len : 0) + (j >> 1)];
                                }
                            }
                            double* gx_n = gx.data() + n * d.Cin * d.L;
                            for (int ci = 0; ci < d.Cin; ++ci)
                                axpy(gx_n + static_cast<std::int64_t>(ci) * d.L,
                                     gxpad.data() + static_cast<std::int64_t>(ci) * Lp + d.pad, 1.0, d.L);
                        }
                    });
                });
            }

            const bool needw = W.requires_grad();
            const bool needb = B.defined() && B.requires_grad();
            if (needw || needb) {
                const std::int64_t nc = chunk_count(d.N);
                const std::size_t wsz = static_cast<std::size_t>(d.Cout) * d.Cin * d.K;
                std::vector<double> partial(static_cast<std::size_t>(nc) * (wsz + d.Cout), 0.0);
                dispatch_taps(md ? d.K : 0, [&](auto kc) {
                    constexpr int KC = kc.value;
                    constexpr int NE = KC ? (KC + 1) / 2 : 0, NO = KC ? KC / 2 : 0;
                    parallel_chunks(d.N, [&](std::int64_t c, std::int64_t n0, std::int64_t n1) {
                        double* pgw = partial.data() + c * (wsz + d.Cout);
                        double* pgb = pgw + wsz;
                        std::vector<double> xpad(static_cast<std::size_t>(d.Cin) * Lp);
                        std::vector<double> phases(md == 2 && KC ? static_cast<std::size_t>(d.Cin) * 2 * ph_len : 0);
                        for (std::int64_t n = n0; n < n1; ++n) {
                            pad_sample(px + n * d.Cin * d.L, xpad.data(), d.Cin, d.L, d.pad);
                            if (md == 2 && KC)
                                for (int ci = 0; ci < d.Cin; ++ci)
                                    split_phases(xpad.data() + static_cast<std::int64_t>(ci) * Lp,
                                                 phases.data() + static_cast<std::int64_t>(ci) * 2 * ph_len,
                                                 phases.data() + static_cast<std::int64_t>(ci) * 2 * ph_len + ph_len,
                                                 Lp, ph_len);
                            const double* g_n = pg + n * d.Cout * d.Lout;
                            for (int co = 0; co < d.Cout; ++co) {
                                const double* grow = g_n + static_cast<std::int64_t>(co) * d.Lout;
                                for (int ci = 0; ci < d.Cin; ++ci) {
                                    double* gwrow = pgw + (static_cast<std::int64_t>(co) * d.Cin + ci) * d.K;
                                    if constexpr (KC == 0) {
                                        const double* xrow = xpad.data() + static_cast<std::int64_t>(ci) * Lp;
                                        for (int k = 0; k < d.K; ++k)
                                            for (int l = 0; l < d.Lout; ++l)
                                                gwrow[k] += grow[l] * xrow[static_cast<std::int64_t>(l) * d.stride + k];
                                    } else if (md == 1) {
                                        corr_dots_t<KC>(grow, xpad.data() + static_cast<std::int64_t>(ci) * Lp,
                                                        gwrow, KC, d.Lout);
                                    } else {
                                        const double* ph = phases.data() + static_cast<std::int64_t>(ci) * 2 * ph_len;
                                        double tmp[NE ? NE : 1];
                                        if (NE) {
                                            for (int a = 0; a < NE; ++a) tmp[a] = 0.0;
                                            corr_dots_t<NE>(grow, ph, tmp, NE, d.Lout);
                                            for (int a = 0; a < NE; ++a) gwrow[2 * a] += tmp[a];
                                        }
                                        double tmo[NO ? NO : 1];
                                        if (NO) {
                                            for (int a = 0; a < NO; ++a) tmo[a] = 0.0;
                                            corr_dots_t<NO>(grow, ph + ph_len, tmo, NO, d.Lout);
                                            for (int a = 0; a < NO; ++a) gwrow[2 * a + 1] += tmo[a];
                                        }
                                    }
                                }
                                if (needb) {
                                    double s = 0.0;
                                    for (int l = 0; l < d.Lout; ++l) s += grow[l];
                                    pgb[co] += s;
                                }
                            }
                        }
                    });
                });
                if (needw) {
                    auto& gw = W.grad();
                    for (std::int64_t c = 0; c < nc; ++c) {
                        const double* pp = partial.data() + c * (wsz + d.Cout);
                        for (std::size_t i = 0; i < wsz; ++i) gw[i] += pp[i];
                    }
                }
                if (needb) {
                    auto& gb = B.grad();
                    for (std::int64_t c = 0; c < nc; ++c) {
                        const double* pp = partial.data() + c * (wsz + d.Cout) + wsz;
                        for (int i = 0; i < d.Cout; ++i) gb[i] += pp[i];
                    }
                }
            }
        });
    }
    return out;
}

Tensor conv1d_transpose(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias,
                        int stride, int padding) {
    const ConvDims d = conv_dims("conv1d_transpose", x, w, bias, stride, padding, true);
    const int Lfull = (d.L - 1) * d.stride + d.K; // before crop
    const int ph_len = Lfull / 2 + d.K + 2;
    const int mode = (d.stride == 1) ? 1 : (d.stride == 2 ? 2 : 0);

    Shape out_shape = d.batched ? Shape{static_cast<int>(d.N), d.Cout, d.Lout}
                                : Shape{d.Cout, d.Lout};
    Tensor out = Tensor::zeros(out_shape);
    {
        const double *px = x.data(), *pw = w.data();
        const double* pb = bias.defined() ? bias.data() : nullptr;
        double* po = out.data();
        dispatch_taps(mode ? d.K : 0, [&](auto kc) {
            constexpr int KC = kc.value;
            constexpr int NE = KC ? (KC + 1) / 2 : 0, NO = KC ? KC / 2 : 0;
            parallel_chunks(d.N, [&, po](std::int64_t, std::int64_t n0, std::int64_t n1) {
                std::vector<double> ypad(static_cast<std::size_t>(d.Cout) * Lfull);
                std::vector<double> yph(mode == 2 && KC ? static_cast<std::size_t>(d.Cout) * 2 * ph_len : 0);
                std::vector<double> xext(static_cast<std::size_t>(d.L) + 2 * d.K + 2);
                double wrev[kMaxTaps];
                const int m_even = (Lfull + 1) / 2, m_odd = Lfull / 2;
                for (std::int64_t n = n0; n < n1; ++n) {
                    std::fill(ypad.begin(), ypad.end(), 0.0);
                    if (!yph.empty()) std::fill(yph.begin(), yph.end(), 0.0);
                    const double* x_n = px + n * d.Cin * d.L;
                    for (int ci = 0; ci < d.Cin; ++ci) {
                        const double* xrow = x_n + static_cast<std::int64_t>(ci) * d.L;
                        if (KC) extend_row(xrow, d.L, d.K - 1, xext.data());
                        for (int co = 0; co < d.Cout; ++co) {
                            const double* wrow = pw + (static_cast<std::int64_t>(ci) * d.Cout + co) * d.K;
                            if constexpr (KC == 0) {
                                double* dst = ypad.data() + static_cast<std::int64_t>(co) * Lfull;
                                for (int k = 0; k < d.K; ++k)
                                    for (int l = 0; l < d.L; ++l)
                                        dst[static_cast<std::int64_t>(l) * d.stride + k] += wrow[k] * xrow[l];
                            } else if (mode == 1) {
                                // ypad[j] += sum_k w[k] x[j-k]
                                reverse_taps(wrow, KC, wrev);
                                corr_add_t<KC>(ypad.data() + static_cast<std::int64_t>(co) * Lfull,
                                               xext.data(), wrev, KC, Lfull);
                            } else {
                                const TapSplit ts = split_taps(wrow, KC);
                                double* ph = yph.data() + static_cast<std::int64_t>(co) * 2 * ph_len;
                                if (NE)
                                    corr_add_t<NE>(ph, xext.data() + (KC - 1) - (NE - 1), ts.even_rev,
                                                   NE, m_even);
                                if (NO)
                                    corr_add_t<NO>(ph + ph_len, xext.data() + (KC - 1) - (NO - 1),
                                                   ts.odd_rev, NO, m_odd);
                            }
                        }
                    }
                    if (mode == 2 && KC) {
                        for (int co = 0; co < d.Cout; ++co) {
                            const double* ph = yph.data() + static_cast<std::int64_t>(co) * 2 * ph_len;
                            double* dst = ypad.data() + static_cast<std::int64_t>(co) * Lfull;
                            for (int j = 0; j < Lfull; ++j) dst[j] += ph[(j & 1 ? ph_len : 0) + (j >> 1)];
                        }
                    }
                    double* y_n = po + n * d.Cout * d.Lout;
                    for (int co = 0; co < d.Cout; ++co) {
                        const double bv = pb ? pb[co] : 0.0;
                        const double* src = ypad.data() + static_cast<std::int64_t>(co) * Lfull + d.pad;
                        double* yrow = y_n + static_cast<std::int64_t>(co) * d.Lout;
                        for (int l = 0; l < d.Lout; ++l) yrow[l] = bv + src[l];
                    }
                }
            });
        });
    }
    finite_check("conv1d_transpose", out);

    const bool needs = tape.recording() &&
                       (x.requires_grad() || w.requires_grad() || (bias.defined() && bias.requires_grad()));
    if (needs) {
        out.set_requires_grad(true);
        std::vector<Tensor> ins = {x, w};
        if (bias.defined()) ins.push_back(bias);
        Tensor X = x, W = w, B = bias, O = out;
        const int md = mode;
        tape.record("conv1d_transpose", std::move(ins), out,
                    [X, W, B, O, d, Lfull, ph_len, md]() mutable {
            const double* pg = O.grad().data();
            const double *px = X.data(), *pw = W.data();

            // upstream gradient padded back to the uncropped length
            auto build_gypad = [&](std::int64_t n, double* gypad) {
                std::memset(gypad, 0, sizeof(double) * static_cast<std::size_t>(d.Cout) * Lfull);
                const double* g_n = pg + n * d.Cout * d.Lout;
                for (int co = 0; co < d.Cout; ++co)
                    std::memcpy(gypad + static_cast<std::int64_t>(co) * Lfull + d.pad,
                                g_n + static_cast<std::int64_t>(co) * d.Lout,
                                sizeof(double) * static_cast<std::size_t>(d.Lout));
            };

            if (X.requires_grad()) {
                auto& gx = X.grad();
                dispatch_taps(md ? d.K : 0, [&](auto kc) {
                    constexpr int KC = kc.value;
                    constexpr int NE = KC ? (KC + 1) / 2 : 0, NO = KC ? KC / 2 : 0;
                    parallel_chunks(d.N, [&](std::int64_t, std::int64_t n0, std::int64_t n1) {
                        std::vector<double> gypad(static_cast<std::size_t>(d.Cout) * Lfull);
                        std::vector<double> gph(md == 2 && KC ? static_cast<std::size_t>(d.Cout) * 2 * ph_len : 0);
                        for (std::int64_t n = n0; n < n1; ++n) {
                            build_gypad(n, gypad.data());
                            if (md == 2 && KC)
                                for (int co = 0; co < d.Cout; ++co)
                                    split_phases(gypad.data() + static_cast<std::int64_t>(co) * Lfull,
                                                 gph.data() + static_cast<std::int64_t>(co) * 2 * ph_len,
                                                 gph.data() + static_cast<std::int64_t>(co) * 2 * ph_len + ph_len,
                                                 Lfull, ph_len);
                            double* gx_n = gx.data() + n * d.Cin * d.L;
                            for (int ci = 0; ci < d.Cin; ++ci) {
                                double* gxrow = gx_n + static_cast<std::int64_t>(ci) * d.L;
                                for (int co = 0; co < d.Cout; ++co) {
                                    const double* wrow = pw + (static_cast<std::int64_t>(ci) * d.Cout + co) * d.K;
                                    if constexpr (KC == 0) {
                                        const double* src = gypad.data() + static_cast<std::int64_t>(co) * Lfull;
                                        for (int k = 0; k < d.K; ++k)
                                            for (int l = 0; l < d.L; ++l)
                                                gxrow[l] += wrow[k] * src[static_cast<std::int64_t>(l) * d.stride + k];
                                    } else if (md == 1) {
                                        corr_add_t<KC>(gxrow,
                                                       gypad.data() + static_cast<std::int64_t>(co) * Lfull,
                                                       wrow, KC, d.L);
                                    } else {
                                        const TapSplit ts = split_taps(wrow, KC);
                                        const double* ph = gph.data() + static_cast<std::int64_t>(co) * 2 * ph_len;
                                        if (NE) corr_add_t<NE>(gxrow, ph, ts.even, NE, d.L);
                                        if (NO) corr_add_t<NO>(gxrow, ph + ph_len, ts.odd, NO, d.L);
                                    }
                                }
                            }
                        }
                    });
                });
            }

            const bool needw = W.requires_grad();
            const bool needb = B.defined() && B.requires_grad();
            if (needw || needb) {
                const std::int64_t nc = chunk_count(d.N);
                const std::size_t wsz = static_cast<std::size_t>(d.Cin) * d.Cout * d.K;
                std::vector<double> partial(static_cast<std::size_t>(nc) * (wsz + d.Cout), 0.0);
                dispatch_taps(md ? d.K : 0, [&](auto kc) {
                    constexpr int KC = kc.value;
                    constexpr int NE = KC ? (KC + 1) / 2 : 0, NO = KC ? KC / 2 : 0;
                    parallel_chunks(d.N, [&](std::int64_t c, std::int64_t n0, std::int64_t n1) {
                        double* pgw = partial.data() + c * (wsz + d.Cout);
                        double* pgb = pgw + wsz;
                        std::vector<double> gypad(static_cast<std::size_t>(d.Cout) * Lfull);
                        std::vector<double> gph(md == 2 && KC ? static_cast<std::size_t>(d.Cout) * 2 * ph_len : 0);
                        for (std::int64_t n = n0; n < n1; ++n) {
                            build_gypad(n, gypad.data());
                            if (md == 2 && KC)
                                for (int co = 0; co < d.Cout; ++co)
                                    split_phases(gypad.data() + static_cast<std::int64_t>(co) * Lfull,
                                                 gph.data() + static_cast<std::int64_t>(co) * 2 * ph_len,
                                                 gph.data() + static_cast<std::int64_t>(co) * 2 * ph_len + ph_len,
                                                 Lfull, ph_len);
                            const double* x_n = px + n * d.Cin * d.L;
                            for (int ci = 0; ci < d.Cin; ++ci) {
                                const double* xrow = x_n + static_cast<std::int64_t>(ci) * d.L;
                                for (int co = 0; co < d.Cout; ++co) {
                                    double* gwrow = pgw + (static_cast<std::int64_t>(ci) * d.Cout + co) * d.K;
                                    if constexpr (KC == 0) {
                                        const double* src = gypad.data() + static_cast<std::int64_t>(co) * Lfull;
                                        for (int k = 0; k < d.K; ++k)
                                            for (int l = 0; l < d.L; ++l)
                                                gwrow[k] += xrow[l] * src[static_cast<std::int64_t>(l) * d.stride + k];
                                    } else if (md == 1) {
                                        corr_dots_t<KC>(xrow,
                                                        gypad.data() + static_cast<std::int64_t>(co) * Lfull,
                                                        gwrow, KC, d.L);
                                    } else {
                                        const double* ph = gph.data() + static_cast<std::int64_t>(co) * 2 * ph_len;
                                        double tmp[NE ? NE : 1];
                                        if (NE) {
                                            for (int a = 0; a < NE; ++a) tmp[a] = 0.0;
                                            corr_dots_t<NE>(xrow, ph, tmp, NE, d.L);
                                            for (int a = 0; a < NE; ++a) gwrow[2 * a] += tmp[a];
                                        }
                                        double tmo[NO ? NO : 1];
                                        if (NO) {
                                            for (int a = 0; a < NO; ++a) tmo[a] = 0.0;
                                            corr_dots_t<NO>(xrow, ph + ph_len, tmo, NO, d.L);
                                            for (int a = 0; a < NO; ++a) gwrow[2 * a + 1] += tmo[a];
                                        }
                                    }
                                }
                            }
                            if (needb) {
                                const double* g_n = pg + n * d.Cout * d.Lout;
                                for (int co = 0; co < d.Cout; ++co) {
                                    double s = 0.0;
                                    const double* grow = g_n + static_cast<std::int64_t>(co) * d.Lout;
                                    for (int l = 0; l < d.Lout; ++l) s += grow[l];
                                    pgb[co] += s;
                                }
                            }
                        }
                    });
                });
                if (needw) {
                    auto& gw = W.grad();
                    for (std::int64_t c = 0; c < nc; ++c) {
                        const double* pp = partial.data() + c * (wsz + d.Cout);
                        for (std::size_t i = 0; i < wsz; ++i) gw[i] += pp[i];
                    }
                }
                if (needb) {
                    auto& gb = B.grad();
                    for (std::int64_t c = 0; c < nc; ++c) {
                        const double* pp = partial.data() + c * (wsz + d.Cout) + wsz;
                        for (int i = 0; i < d.Cout; ++i) gb[i] += pp[i];
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// squared distances to codebook rows

Tensor sqdist_rows(Tape& tape, const Tensor& z, const Tensor& e) {
    if (z.ndim() != 2 || e.ndim() != 2)
        throw std::invalid_argument("sqdist_rows: expected [S,d] and [k,d], got " +
                                    shape_str(z.shape()) + " and " + shape_str(e.shape()));
    if (z.dim(1) != e.dim(1))
        throw std::invalid_argument("sqdist_rows: latent width " + std::to_string(z.dim(1)) +
                                    " does not match codebook width " + std::to_string(e.dim(1)));
    const int S = z.dim(0), dd = z.dim(1), k = e.dim(0);
    Tensor out = Tensor::zeros({S, k});
    {
        const double *pz = z.data(), *pe = e.data();
        double* po = out.data();
        parallel_chunks(S, [&](std::int64_t, std::int64_t s0, std::int64_t s1) {
            for (std::int64_t s = s0; s < s1; ++s) {
                const double* zrow = pz + s * dd;
                double* orow = po + s * k;
                for (int i = 0; i < k; ++i) {
                    const double* erow = pe + static_cast<std::int64_t>(i) * dd;
                    double acc = 0.0;
                    for (int j = 0; j < dd; ++j) {
                        const double dv = zrow[j] - erow[j];
                        acc += dv * dv;
                    }
                    orow[i] = acc;
                }
            }
        });
    }
    finite_check("sqdist_rows", out);
    if (track(tape, z, e)) {
        out.set_requires_grad(true);
        Tensor Z = z, E = e, O = out;
        tape.record("sqdist_rows", {z, e}, out, [Z, E, O, S, dd, k]() mutable {
            const auto& g = O.grad();
            const double *pz = Z.data(), *pe = E.data();
            if (Z.requires_grad()) {
                auto& gz = Z.grad();
                parallel_chunks(S, [&](std::int64_t, std::int64_t s0, std::int64_t s1) {
                    for (std::int64_t s = s0; s < s1; ++s) {
                        const double* zrow = pz + s * dd;
                        const double* grow = g.data() + s * k;
                        double* gzrow = gz.data() + s * dd;
                        for (int i = 0; i < k; ++i) {
                            const double gi2 = 2.0 * grow[i];
                            const double* erow = pe + static_cast<std::int64_t>(i) * dd;
                            for (int j = 0; j < dd; ++j) gzrow[j] += gi2 * (zrow[j] - erow[j]);
                        }
                    }
                });
            }
            if (E.requires_grad()) {
                const std::int64_t nc = chunk_count(S);
                const std::size_t esz = static_cast<std::size_t>(k) * dd;
                std::vector<double> partial(static_cast<std::size_t>(nc) * esz, 0.0);
                parallel_chunks(S, [&](std::int64_t c, std::int64_t s0, std::int64_t s1) {
                    double* pp = partial.data() + c * esz;
                    for (std::int64_t s = s0; s < s1; ++s) {
                        const double* zrow = pz + s * dd;
                        const double* grow = g.data() + s * k;
                        for (int i = 0; i < k; ++i) {
                            const double gi2 = 2.0 * grow[i];
                            const double* erow = pe + static_cast<std::int64_t>(i) * dd;
                            double* pprow = pp + static_cast<std::int64_t>(i) * dd;
                            for (int j = 0; j < dd; ++j) pprow[j] -= gi2 * (zrow[j] - erow[j]);
                        }
                    }
                });
                auto& ge = E.grad();
                for (std::int64_t c = 0; c < nc; ++c) {
                    const double* pp = partial.data() + c * esz;
                    for (std::size_t i = 0; i < esz; ++i) ge[i] += pp[i];
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// detach / sampling

Tensor detach(const Tensor& a) { return a.detached(); }

Tensor sample_gumbel(Rng& rng, Shape shape) {
    Tensor out = Tensor::zeros(std::move(shape));
    double* po = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] = rng.gumbel();
    return out;
}

Tensor sample_normal(Rng& rng, Shape shape) {
    Tensor out = Tensor::zeros(std::move(shape));
    double* po = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] = rng.normal();
    return out;
}

} // namespace bundlecodec::diff
