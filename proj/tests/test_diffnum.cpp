#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bundlecodec/adam.hpp"
#include "bundlecodec/gradcheck.hpp"
#include "bundlecodec/ops.hpp"
#include "bundlecodec/rng.hpp"
#include "bundlecodec/tensor.hpp"

#include <cmath>
#include <numeric>

using namespace bundlecodec::diff;

namespace {

Tensor make_rand(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform_range(lo, hi);
    return t;
}

bool bits_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.data()[i] != b.data()[i]) return false;
    return true;
}

} // namespace

TEST_CASE("tensor shape and data invariants") {
    CHECK_THROWS(Tensor::from({2, 3}, {1.0, 2.0})); // product(shape) != len
    CHECK_THROWS(Tensor::zeros({0, 3}));
    Tensor t = Tensor::from({2, 2}, {1, 2, 3, 4});
    CHECK(t.size() == 4);
    CHECK(t.at(3) == 4.0);
    CHECK_THROWS(t.value());
}

TEST_CASE("debug evaluation mode flags non-finite values") {
    Tape tape;
    Tensor x = Tensor::from({2}, {1.0, 2.0});
    set_debug_finite_checks(true);
    CHECK_THROWS_AS(scale(tape, x, std::numeric_limits<double>::infinity()), std::runtime_error);
    set_debug_finite_checks(false);
    CHECK_NOTHROW(scale(tape, x, std::numeric_limits<double>::infinity()));
}

TEST_CASE("conv1d hand example with zero padding") {
    Tape tape;
    Tensor x = Tensor::from({1, 3}, {1, 2, 3});
    Tensor w = Tensor::from({1, 1, 3}, {1, 0, -1});
    Tensor y = conv1d(tape, x, w, Tensor(), 1, 1);
    REQUIRE(y.shape() == Shape{1, 3});
    CHECK(y.at(0) == doctest::Approx(-2).epsilon(1e-12));
    CHECK(y.at(1) == doctest::Approx(-2).epsilon(1e-12));
    CHECK(y.at(2) == doctest::Approx(2).epsilon(1e-12));
}

TEST_CASE("conv1d identity kernel reproduces input") {
    Rng rng(11);
    Tensor x = make_rand({3, 7}, rng);
    Tensor w = Tensor::zeros({3, 3, 1});
    for (int c = 0; c < 3; ++c) w.data()[c * 3 + c] = 1.0;
    Tape tape;
    Tensor y = conv1d(tape, x, w, Tensor(), 1, 0);
    CHECK(bits_equal(x.detached().reshaped({3, 7}), y));
}

TEST_CASE("conv1d zero input gives zero output and zero input gradient") {
    Tensor x = Tensor::zeros({2, 2, 8}, true);
    Rng rng(3);
    Tensor w = make_rand({4, 2, 3}, rng).set_requires_grad(true);
    Tape tape;
    Tensor y = conv1d(tape, x, w, Tensor(), 1, 1);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.at(i) == 0.0);
    Tensor loss = mse_loss(tape, y, Tensor::zeros(y.shape()));
    tape.backward(loss);
    for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("conv1d bad shapes raise descriptive errors") {
    Tape tape;
    Tensor x = Tensor::zeros({2, 8});
    Tensor w = Tensor::zeros({4, 3, 3}); // C_in mismatch
    CHECK_THROWS_WITH_AS(conv1d(tape, x, w, Tensor(), 1, 0),
                         doctest::Contains("does not match weight C_in"), std::invalid_argument);
    Tensor w2 = Tensor::zeros({4, 2, 11}); // kernel longer than padded input
    CHECK_THROWS_AS(conv1d(tape, x, w2, Tensor(), 1, 1), std::invalid_argument);
}

TEST_CASE("softmax_temp examples") {
    Tape tape;
    Tensor l = Tensor::from({2}, {-1, -4});
    Tensor w = softmax_temp(tape, l, 1.0);
    CHECK(w.at(0) == doctest::Approx(0.9526).epsilon(1e-4));
    CHECK(w.at(1) == doctest::Approx(0.0474).epsilon(1e-3));

    Tensor u = Tensor::from({3}, {0.37, 0.37, 0.37});
    Tensor wu = softmax_temp(tape, u, 7.3);
    for (int i = 0; i < 3; ++i) CHECK(wu.at(i) == doctest::Approx(1.0 / 3).epsilon(1e-12));

    Tensor s = Tensor::from({2}, {5, 0});
    Tensor ws = softmax_temp(tape, s, 1e-3);
    CHECK(ws.at(0) > 1.0 - 1e-6);

    CHECK_THROWS_AS(softmax_temp(tape, l, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(softmax_temp(tape, l, -2.0), std::invalid_argument);
}

TEST_CASE("softmax_temp output is a probability vector") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor l = make_rand({5, 9}, rng, -30, 30);
        Tape tape;
        Tensor w = softmax_temp(tape, l, rng.uniform_range(0.05, 20.0));
        for (int r = 0; r < 5; ++r) {
            double s = 0.0;
            for (int i = 0; i < 9; ++i) {
                const double v = w.at(r * 9 + i);
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                s += v;
            }
            CHECK(std::abs(s - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("sample_gumbel analytic point, moment and determinism") {
    CHECK(std::abs(gumbel_from_uniform(std::exp(-1.0))) < 1e-12);

    Rng rng(1234);
    Tensor g = sample_gumbel(rng, {1000, 1000});
    double mean = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) mean += g.at(i);
    mean /= static_cast<double>(g.size());
    CHECK(mean == doctest::Approx(0.5772156649).epsilon(5e-3)); // Euler-Mascheroni

    Rng r1(42), r2(42);
    Tensor a = sample_gumbel(r1, {64});
    Tensor b = sample_gumbel(r2, {64});
    CHECK(bits_equal(a, b));
}

TEST_CASE("mse_loss examples and gradient") {
    Tape tape;
    Tensor a = Tensor::from({2}, {1, 2}).set_requires_grad(true);
    Tensor b = Tensor::from({2}, {0, 0});
    Tensor same = mse_loss(tape, b, b);
    CHECK(same.value() == 0.0);

    Tensor l = mse_loss(tape, a, b);
    CHECK(l.value() == doctest::Approx(2.5).epsilon(1e-15));
    tape.backward(l);
    CHECK(a.grad()[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(a.grad()[1] == doctest::Approx(2.0).epsilon(1e-15));

    CHECK_THROWS_AS(mse_loss(tape, a, Tensor::zeros({3})), std::invalid_argument);
}

TEST_CASE("backward basics") {
    SUBCASE("x*x at 3") {
        Tape tape;
        Tensor x = Tensor::scalar(3.0, true);
        Tensor y = mul(tape, x, x);
        tape.backward(y);
        CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-15));
    }
    SUBCASE("relu(-x) at 2 sits in the dead region") {
        Tape tape;
        Tensor x = Tensor::scalar(2.0, true);
        Tensor y = relu(tape, scale(tape, x, -1.0));
        tape.backward(y);
        CHECK(x.grad()[0] == 0.0);
    }
    SUBCASE("loss must be scalar and tape-produced") {
        Tape tape;
        Tensor x = Tensor::from({2}, {1, 2}, true);
        Tensor y = add(tape, x, x);
        CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
        Tensor stray = Tensor::scalar(1.0);
        CHECK_THROWS_AS(tape.backward(stray), std::invalid_argument);
    }
    SUBCASE("fan-out accumulates: f = g(x) + g(x)") {
        auto gval = [](Tape& t, Tensor x) { return mean(t, mul(t, x, x)); };
        Rng rng(7);
        Tensor x1 = make_rand({6}, rng).set_requires_grad(true);
        Tensor x2 = x1.clone();
        Tape t1;
        Tensor f = add(t1, gval(t1, x1), gval(t1, x1));
        t1.backward(f);
        Tape t2;
        Tensor g1 = gval(t2, x2);
        t2.backward(g1);
        for (int i = 0; i < 6; ++i)
            CHECK(x1.grad()[i] == doctest::Approx(2.0 * x2.grad()[i]).epsilon(1e-14));
    }
    SUBCASE("non-participating leaves get zero") {
        Tape tape;
        Tensor x = Tensor::scalar(2.0, true);
        Tensor unused = Tensor::scalar(5.0, true);
        Tensor y = mul(tape, x, x);
        Tensor z = mul(tape, unused, unused); // recorded but not part of loss
        (void)z;
        tape.backward(y);
        CHECK(unused.grad()[0] == 0.0);
    }
}

TEST_CASE("adam examples") {
    SUBCASE("first step lands at -lr with unit gradient") {
        std::vector<Tensor> params = {Tensor::scalar(0.0, true)};
        params[0].grad()[0] = 1.0;
        AdamState st;
        st.lr = 0.1;
        adam_step(params, st);
        CHECK(params[0].value() == doctest::Approx(-0.1).epsilon(1e-6));
        CHECK(st.t == 1);
    }
    SUBCASE("zero gradient with zero state leaves parameters unchanged") {
        std::vector<Tensor> params = {Tensor::from({3}, {1, -2, 0.5}, true)};
        params[0].grad(); // zeros
        AdamState st;
        adam_step(params, st);
        CHECK(params[0].at(0) == 1.0);
        CHECK(params[0].at(1) == -2.0);
        CHECK(params[0].at(2) == 0.5);
    }
    SUBCASE("identical inputs give bitwise identical updates") {
        auto run = [] {
            Rng rng(5);
            std::vector<Tensor> params = {make_rand({17}, rng).set_requires_grad(true)};
            for (std::size_t i = 0; i < 17; ++i) params[0].grad()[i] = rng.uniform_range(-1, 1);
            AdamState st;
            for (int it = 0; it < 5; ++it) adam_step(params, st);
            return params[0];
        };
        CHECK(bits_equal(run(), run()));
    }
}

TEST_CASE("grad_check on a quadratic form and a broken gradient") {
    Rng rng(21);
    Tensor a = make_rand({4, 4}, rng);
    auto quad = [a](Tape& t, std::vector<Tensor>& pt) {
        Tensor ax = matvec(t, a, pt[0]);
        return mean(t, mul(t, ax, ax));
    };
    auto rep = grad_check(quad, {make_rand({4}, rng)}, 1e-5, 1e-6);
    CHECK(rep.pass);

    // negative control: op recorded with an intentionally wrong backward rule
    auto broken = [](Tape& t, std::vector<Tensor>& pt) {
        Tensor x = pt[0];
        Tensor out = Tensor::zeros(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = x.at(i) * x.at(i);
        out.set_requires_grad(true);
        Tensor X = x, O = out;
        t.record("broken_square", {x}, out, [X, O]() mutable {
            auto& gx = X.grad();
            const auto& g = O.grad();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += 3.0 * g[i]; // wrong on purpose
        });
        return sum(t, out);
    };
    auto bad = grad_check(broken, {make_rand({5}, rng)}, 1e-5, 1e-4);
    CHECK_FALSE(bad.pass);

    auto nonscalar = [](Tape& t, std::vector<Tensor>& pt) { return add(t, pt[0], pt[0]); };
    CHECK_THROWS_AS(grad_check(nonscalar, {make_rand({3}, rng)}), std::invalid_argument);
}

// Every primitive against central finite differences on randomized inputs.
TEST_CASE("primitive gradients match finite differences") {
    auto fd_ok = [](const ScalarFn& f, std::vector<Tensor> pt) {
        auto rep = grad_check(f, std::move(pt), 1e-5, 1e-4);
        CHECK(rep.max_rel_err < 1e-4);
        return rep.pass;
    };

    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        Rng rng(1000 + trial);
        Tensor target3 = make_rand({2, 3, 6}, rng);

        // elementwise chain: relu/exp/mul/add/sub/scale/add_const
        {
            auto f = [&](Tape& t, std::vector<Tensor>& pt) {
                Tensor h = relu(t, pt[0]);
                h = add(t, h, exp_elem(t, scale(t, pt[1], 0.3)));
                h = mul(t, h, sub(t, pt[0], pt[1]));
                h = add_const(t, h, 0.25);
                return mean(t, mul(t, h, h));
            };
            // keep relu inputs away from the kink
            Tensor x = make_rand({7}, rng, 0.1, 1.0);
            Tensor y = make_rand({7}, rng, -1.0, -0.1);
            fd_ok(f, {x, y});
        }
        // conv1d stride 1 and stride 2 and generic stride 3, with bias
        {
            auto f = [&](Tape& t, std::vector<Tensor>& pt) {
                Tensor y = conv1d(t, pt[0], pt[1], pt[2], 1, 1);
                Tensor y2 = conv1d(t, y, pt[3], Tensor(), 2, 1);
                return mse_loss(t, y2, Tensor::zeros(y2.shape()));
            };
            fd_ok(f, {make_rand({2, 3, 8}, rng), make_rand({4, 3, 3}, rng), make_rand({4}, rng),
                      make_rand({2, 4, 4}, rng)});
            auto f3 = [&](Tape& t, std::vector<Tensor>& pt) {
                Tensor y = conv1d(t, pt[0], pt[1], Tensor(), 3, 2);
                return sum(t, mul(t, y, y));
            };
            fd_ok(f3, {make_rand({2, 9}, rng), make_rand({3, 2, 4}, rng)});
        }
        // conv1d_transpose stride 1 / 2
        {
            auto f = [&](Tape& t, std::vector<Tensor>& pt) {
                Tensor y = conv1d_transpose(t, pt[0], pt[1], pt[2], 2, 1);
                Tensor y2 = conv1d_transpose(t, y, pt[3], Tensor(), 1, 0);
                return mse_loss(t, y2, Tensor::zeros(y2.shape()));
            };
            fd_ok(f, {make_rand({2, 3, 5}, rng), make_rand({3, 2, 4}, rng), make_rand({2}, rng),
                      make_rand({2, 3, 3}, rng)});
        }
        // linear / matmul / matvec / reshape
        {
            auto f = [&](Tape& t, std::vector<Tensor>& pt) {
                Tensor h = linear(t, pt[0], pt[1], pt[2]);
                h = reshape(t, h, {h.dim(0) * h.dim(1)});
                return mean(t, mul(t, h, h));
            };
            fd_ok(f, {make_rand({3, 4}, rng), make_rand({5, 4}, rng), make_rand({5}, rng)});
            auto g = [&](Tape& t, std::vector<Tensor>& pt) {
                Tensor h = matmul(t, pt[0], pt[1]);
                return sum(t, h);
            };
            fd_ok(g, {make_rand({3, 4}, rng), make_rand({4, 2}, rng)});
            auto mv = [&](Tape& t, std::vector<Tensor>& pt) {
                Tensor h = matvec(t, pt[0], pt[1]);
                return mean(t, mul(t, h, h));
            };
            fd_ok(mv, {make_rand({3, 4}, rng), make_rand({4}, rng)});
        }
        // softmax_temp + sqdist_rows + mse
        {
            auto f = [&](Tape& t, std::vector<Tensor>& pt) {
                Tensor dist = sqdist_rows(t, pt[0], pt[1]);
                Tensor w = softmax_temp(t, scale(t, dist, -1.0), 2.5);
                Tensor s = matmul(t, w, pt[1]);
                return mse_loss(t, s, pt[0]);
            };
            fd_ok(f, {make_rand({3, 4}, rng), make_rand({5, 4}, rng)});
        }
    }
}

TEST_CASE("results are bitwise identical across thread counts") {
    Rng rng(404);
    Tensor x = make_rand({40, 3, 16}, rng);
    Tensor w = make_rand({8, 3, 3}, rng);
    Tensor b = make_rand({8}, rng);

    auto run = [&](int nthreads) {
        set_threads(nthreads);
        Tensor xi = x.clone().set_requires_grad(true);
        Tensor wi = w.clone().set_requires_grad(true);
        Tensor bi = b.clone().set_requires_grad(true);
        Tape tape;
        Tensor y = conv1d(tape, xi, wi, bi, 2, 1);
        Tensor l = mse_loss(tape, y, Tensor::zeros(y.shape()));
        tape.backward(l);
        set_threads(1);
        return std::tuple{y, Tensor::from({static_cast<int>(wi.size())}, wi.grad()),
                          Tensor::from({static_cast<int>(xi.size())}, xi.grad())};
    };
    auto [y1, gw1, gx1] = run(1);
    auto [y2, gw2, gx2] = run(2);
    auto [y4, gw4, gx4] = run(4);
    CHECK(bits_equal(y1, y2));
    CHECK(bits_equal(gw1, gw2));
    CHECK(bits_equal(gx1, gx2));
    CHECK(bits_equal(gw1, gw4));
    CHECK(bits_equal(gx1, gx4));
}

TEST_CASE("forward, gradient and update determinism with equal seeds") {
    auto run = [] {
        Rng rng(31337);
        Tensor x = make_rand({4, 2, 8}, rng).set_requires_grad(true);
        Tensor w = make_rand({3, 2, 3}, rng).set_requires_grad(true);
        Tape tape;
        Tensor y = conv1d(tape, x, w, Tensor(), 1, 1);
        Tensor g = sample_gumbel(rng, y.shape());
        Tensor l = mse_loss(tape, y, g);
        tape.backward(l);
        std::vector<Tensor> params = {w};
        AdamState st;
        adam_step(params, st);
        return std::tuple{l, w};
    };
    auto [l1, w1] = run();
    auto [l2, w2] = run();
    CHECK(l1.value() == l2.value());
    CHECK(bits_equal(w1, w2));
}
