#include "bundlecodec/probe.hpp"

#include "bundlecodec/gradcheck.hpp"

#include <algorithm>

namespace bundlecodec::probe {

using diff::GradCheckReport;
using diff::Rng;
using diff::ScalarFn;
using diff::Shape;
using diff::Tape;
using diff::Tensor;

namespace {

Tensor rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform_range(lo, hi);
    return t;
}

SuiteLine run_trials(const std::string& name, std::uint64_t seed,
                     const std::function<GradCheckReport(Rng&)>& one_trial, int trials = 20) {
    SuiteLine line;
    line.name = name;
    line.pass = true;
    for (int t = 0; t < trials; ++t) {
        Rng rng(seed * 7919 + static_cast<std::uint64_t>(t));
        GradCheckReport rep = one_trial(rng);
        line.max_rel_err = std::max(line.max_rel_err, rep.max_rel_err);
        line.checked += rep.checked;
        line.pass = line.pass && rep.pass;
    }
    return line;
}

} // namespace

std::vector<SuiteLine> primitive_fd_suite(std::uint64_t seed) {
    std::vector<SuiteLine> lines;
    auto push = [&](const std::string& name, const std::function<GradCheckReport(Rng&)>& f) {
        lines.push_back(run_trials(name, seed + lines.size(), f));
    };

    push("add/sub/mul/scale/add_const", [](Rng& rng) {
        auto f = [](Tape& t, std::vector<Tensor>& pt) {
            Tensor h = diff::mul(t, diff::add(t, pt[0], pt[1]), diff::sub(t, pt[0], pt[1]));
            h = diff::add_const(t, diff::scale(t, h, 0.7), 0.3);
            return diff::mean(t, diff::mul(t, h, h));
        };
        return diff::grad_check(f, {rand_tensor({6}, rng), rand_tensor({6}, rng)});
    });
    push("relu", [](Rng& rng) {
        auto f = [](Tape& t, std::vector<Tensor>& pt) {
            return diff::sum(t, diff::relu(t, pt[0]));
        };
        // keep inputs away from the kink
        Tensor x = rand_tensor({9}, rng, 0.1, 1.0);
        for (std::size_t i = 0; i < 4; ++i) x.data()[i] = -x.data()[i];
        return diff::grad_check(f, {x});
    });
    push("exp", [](Rng& rng) {
        auto f = [](Tape& t, std::vector<Tensor>& pt) {
            return diff::mean(t, diff::exp_elem(t, pt[0]));
        };
        return diff::grad_check(f, {rand_tensor({7}, rng)});
    });
    push("reshape/sum/mean", [](Rng& rng) {
        auto f = [](Tape& t, std::vector<Tensor>& pt) {
            Tensor h = diff::reshape(t, pt[0], {6});
            return diff::add(t, diff::sum(t, h), diff::mean(t, diff::mul(t, h, h)));
        };
        return diff::grad_check(f, {rand_tensor({2, 3}, rng)});
    });
    push("mse_loss", [](Rng& rng) {
        auto f = [](Tape& t, std::vector<Tensor>& pt) { return diff::mse_loss(t, pt[0], pt[1]); };
        return diff::grad_check(f, {rand_tensor({8}, rng), rand_tensor({8}, rng)});
    });
    push("softmax_temp", [](Rng& rng) {
        const double tau = rng.uniform_range(0.3, 8.0);
        auto f = [tau](Tape& t, std::vector<Tensor>& pt) {
            Tensor w = diff::softmax_temp(t, pt[0], tau);
            return diff::mse_loss(t, w, pt[1]);
        };
        return diff::grad_check(f, {rand_tensor({3, 5}, rng, -4, 4), rand_tensor({3, 5}, rng)});
    });
    push("matmul/matvec/linear", [](Rng& rng) {
        auto f = [](Tape& t, std::vector<Tensor>& pt) {
            Tensor h = diff::linear(t, pt[0], pt[1], pt[2]);
            Tensor g = diff::matmul(t, h, pt[3]);
            Tensor v = diff::matvec(t, g, pt[4]);
            return diff::mean(t, diff::mul(t, v, v));
        };
        return diff::grad_check(f, {rand_tensor({3, 4}, rng), rand_tensor({5, 4}, rng),
                                    rand_tensor({5}, rng), rand_tensor({5, 2}, rng),
                                    rand_tensor({2}, rng)});
    });
    push("conv1d stride1+2", [](Rng& rng) {
        auto f = [](Tape& t, std::vector<Tensor>& pt) {
            Tensor y = diff::conv1d(t, pt[0], pt[1], pt[2], 1, 1);
            Tensor y2 = diff::conv1d(t, y, pt[3], Tensor(), 2, 1);
            return diff::mse_loss(t, y2, Tensor::zeros(y2.shape()));
        };
        return diff::grad_check(f, {rand_tensor({2, 3, 8}, rng), rand_tensor({4, 3, 3}, rng),
                                    rand_tensor({4}, rng), rand_tensor({2, 4, 4}, rng)});
    });
    push("conv1d generic stride", [](Rng& rng) {
        auto f = [](Tape& t, std::vector<Tensor>& pt) {
            Tensor y = diff::conv1d(t, pt[0], pt[1], Tensor(), 3, 2);
            return diff::sum(t, diff::mul(t, y, y));
        };
        return diff::grad_check(f, {rand_tensor({2, 9}, rng), rand_tensor({3, 2, 4}, rng)});
    });
    push("conv1d_transpose stride1+2", [](Rng& rng) {
        auto f = [](Tape& t, std::vector<Tensor>& pt) {
            Tensor y = diff::conv1d_transpose(t, pt[0], pt[1], pt[2], 2, 1);
            Tensor y2 = diff::conv1d_transpose(t, y, pt[3], Tensor(), 1, 0);
            return diff::mse_loss(t, y2, Tensor::zeros(y2.shape()));
        };
        return diff::grad_check(f, {rand_tensor({2, 3, 5}, rng), rand_tensor({3, 2, 4}, rng),
                                    rand_tensor({2}, rng), rand_tensor({2, 3, 3}, rng)});
    });
    push("sqdist_rows + codebook combination", [](Rng& rng) {
        auto f = [](Tape& t, std::vector<Tensor>& pt) {
            Tensor dist = diff::sqdist_rows(t, pt[0], pt[1]);
            Tensor w = diff::softmax_temp(t, diff::scale(t, dist, -1.0), 2.0);
            Tensor s = diff::matmul(t, w, pt[1]);
            return diff::mse_loss(t, s, pt[0]);
        };
        return diff::grad_check(f, {rand_tensor({3, 4}, rng), rand_tensor({5, 4}, rng)});
    });
    return lines;
}

std::vector<SuiteLine> model_fd_suite(std::uint64_t seed, int S, int P, int d, int k,
                                      std::size_t max_coords) {
    std::vector<SuiteLine> lines;
    Rng data_rng(seed);
    Tensor x = rand_tensor({S, 3, P}, data_rng);

    for (codec::BottleneckKind kind :
         {codec::BottleneckKind::AE, codec::BottleneckKind::VAE, codec::BottleneckKind::VQVAE,
          codec::BottleneckKind::VQEMA, codec::BottleneckKind::VQDIFF}) {
        codec::Hyper hp;
        Rng init_rng(seed + 17);
        codec::Model m = codec::make_model(kind, P, d, k, hp, init_rng);
        Rng noise_rng(seed + 23);
        Tensor gumbel = diff::sample_gumbel(noise_rng, {S, k});
        Tensor gauss = diff::sample_normal(noise_rng, {S, d});

        const auto names = fd_checkable_params(m);
        std::vector<Tensor> point;
        for (auto& [name, t] : m.named_parameters())
            if (std::find(names.begin(), names.end(), name) != names.end())
                point.push_back(t.clone());

        auto f = [&](Tape& t, std::vector<Tensor>& pt) {
            std::map<std::string, Tensor> repl;
            for (std::size_t i = 0; i < names.size(); ++i) repl[names[i]] = pt[i];
            codec::Model bound = bind_params(m, repl);
            return frozen_loss(t, bound, x, &gumbel, &gauss);
        };
        GradCheckReport rep = diff::grad_check(f, point, 1e-5, 1e-4, max_coords);
        SuiteLine line;
        line.name = std::string("loss[") + codec::kind_name(kind) + "]" +
                    (kind == codec::BottleneckKind::VQVAE || kind == codec::BottleneckKind::VQEMA
                         ? " (decoder path; straight-through checked by contract)"
                         : "");
        line.max_rel_err = rep.max_rel_err;
        line.pass = rep.pass;
        line.checked = rep.checked;
        lines.push_back(std::move(line));
    }
    return lines;
}

} // namespace bundlecodec::probe
