#pragma once

// Gradient-probing helpers: rebuild a Model around replacement parameter
// handles and run its loss on a fixed batch with frozen noise, so the whole
// map is a deterministic function and finite differences are well defined.
// Used by the gradcheck command and the verification suites.

#include "bundlecodec/codec.hpp"

#include <map>
#include <string>
#include <vector>

namespace bundlecodec::probe {

using codec::BottleneckKind;
using codec::Model;
using diff::Tape;
using diff::Tensor;

// Replaces the named parameter handles found in `repl`; everything else
// keeps the base model's storage.
inline Model bind_params(const Model& base, const std::map<std::string, Tensor>& repl) {
    Model m = base;
    auto maybe = [&](const std::string& name, Tensor& slot) {
        auto it = repl.find(name);
        if (it != repl.end()) slot = it->second;
    };
    maybe("enc.stem.w", m.stem.w);
    maybe("enc.stem.b", m.stem.b);
    maybe("enc.r1.c1.w", m.enc_r1.c1.w);
    maybe("enc.r1.c1.b", m.enc_r1.c1.b);
    maybe("enc.r1.c2.w", m.enc_r1.c2.w);
    maybe("enc.r1.c2.b", m.enc_r1.c2.b);
    maybe("enc.r2.c1.w", m.enc_r2.c1.w);
    maybe("enc.r2.c1.b", m.enc_r2.c1.b);
    maybe("enc.r2.c2.w", m.enc_r2.c2.w);
    maybe("enc.r2.c2.b", m.enc_r2.c2.b);
    maybe("enc.down1.w", m.down1.w);
    maybe("enc.down1.b", m.down1.b);
    maybe("enc.down2.w", m.down2.w);
    maybe("enc.down2.b", m.down2.b);
    maybe("enc.proj.w", m.proj_w);
    maybe("enc.proj.b", m.proj_b);
    maybe("dec.fc.w", m.fc_w);
    maybe("dec.fc.b", m.fc_b);
    maybe("dec.up1.w", m.up1.w);
    maybe("dec.up1.b", m.up1.b);
    maybe("dec.up2.w", m.up2.w);
    maybe("dec.up2.b", m.up2.b);
    maybe("dec.r1.c1.w", m.dec_r1.c1.w);
    maybe("dec.r1.c1.b", m.dec_r1.c1.b);
    maybe("dec.r1.c2.w", m.dec_r1.c2.w);
    maybe("dec.r1.c2.b", m.dec_r1.c2.b);
    maybe("dec.r2.c1.w", m.dec_r2.c1.w);
    maybe("dec.r2.c1.b", m.dec_r2.c1.b);
    maybe("dec.r2.c2.w", m.dec_r2.c2.w);
    maybe("dec.r2.c2.b", m.dec_r2.c2.b);
    maybe("dec.out.w", m.out.w);
    maybe("dec.out.b", m.out.b);
    maybe("codebook", m.codebook);
    maybe("vae.mu.w", m.mu_w);
    maybe("vae.mu.b", m.mu_b);
    maybe("vae.lv.w", m.lv_w);
    maybe("vae.lv.b", m.lv_b);
    return m;
}

// Full training loss with frozen noise tensors.
inline Tensor frozen_loss(Tape& tape, Model& m, const Tensor& x, const Tensor* gumbel,
                          const Tensor* gauss) {
    using namespace codec;
    Tensor z = encode(tape, m, x);
    BottleneckOut bn;
    bn.z = z;
    switch (m.kind) {
        case BottleneckKind::AE:
            bn.code = z;
            break;
        case BottleneckKind::VAE: {
            bn.mu = diff::linear(tape, z, m.mu_w, m.mu_b);
            bn.logvar = diff::linear(tape, z, m.lv_w, m.lv_b);
            auto [zs, kl] = bottleneck_vae(tape, bn.mu, bn.logvar, gauss);
            bn.code = zs;
            bn.kl_term = kl;
            break;
        }
        case BottleneckKind::VQVAE:
        case BottleneckKind::VQEMA: {
            auto q = quantize_vqvae(tape, z, m.codebook);
            bn.code = q.straight_through;
            bn.quantized = q.quantized;
            bn.assignments = std::move(q.assignments);
            break;
        }
        case BottleneckKind::VQDIFF: {
            auto [s, w] = quantize_vqdiff_noise(tape, z, m.codebook, m.hp.beta_temp, gumbel);
            (void)w;
            bn.code = s;
            bn.quantized = s;
            break;
        }
    }
    codec::Forward fwd;
    fwd.z = z;
    fwd.bn = bn;
    fwd.recon = decode(tape, m, bn.code);
    return model_loss(tape, m, fwd, x);
}

// Parameters whose end-to-end loss gradient is a true derivative, i.e. the
// finite-difference oracle applies. The straight-through kinds define the
// encoder and codebook gradients by contract instead (the gradient stops in
// z + sg[s-z], mse(s, sg[z]) and mse(z, sg[s]) intentionally diverge from the
// true derivative), so only the decoder path is listed for them; the codebook
// term is checked in isolation where it is differentiable.
inline std::vector<std::string> fd_checkable_params(Model& m) {
    std::vector<std::string> names;
    for (auto& [name, t] : m.named_parameters()) {
        (void)t;
        if (m.kind == BottleneckKind::VQVAE || m.kind == BottleneckKind::VQEMA) {
            if (name.rfind("dec.", 0) != 0) continue;
        }
        names.push_back(name);
    }
    return names;
}

// ---- gradient integrity suites ---------------------------------------------

struct SuiteLine {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = false;
    std::size_t checked = 0;
};

// Central finite differences against every primitive on randomized inputs
// (20 trials each, step 1e-5, tolerance 1e-4).
std::vector<SuiteLine> primitive_fd_suite(std::uint64_t seed);

// End-to-end loss of each architecture on an S x 3 x P toy bundle with frozen
// noise. max_coords = 0 checks every coordinate of every checkable tensor;
// a positive value checks that many evenly strided coordinates per tensor.
std::vector<SuiteLine> model_fd_suite(std::uint64_t seed, int S, int P, int d, int k,
                                      std::size_t max_coords);

} // namespace bundlecodec::probe
