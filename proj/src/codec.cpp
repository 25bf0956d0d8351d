#include "bundlecodec/codec.hpp"

#include <cmath>
#include <stdexcept>

namespace bundlecodec::codec {

using namespace bundlecodec::diff;

const char* kind_name(BottleneckKind k) {
    switch (k) {
        case BottleneckKind::AE: return "ae";
        case BottleneckKind::VAE: return "vae";
        case BottleneckKind::VQVAE: return "vqvae";
        case BottleneckKind::VQEMA: return "vqema";
        case BottleneckKind::VQDIFF: return "vqdiff";
    }
    return "unknown";
}

BottleneckKind kind_from_name(const std::string& name) {
    if (name == "ae") return BottleneckKind::AE;
    if (name == "vae") return BottleneckKind::VAE;
    if (name == "vqvae") return BottleneckKind::VQVAE;
    if (name == "vqema") return BottleneckKind::VQEMA;
    if (name == "vqdiff") return BottleneckKind::VQDIFF;
    throw std::invalid_argument("codec: unknown architecture '" + name +
                                "' (expected ae|vae|vqvae|vqema|vqdiff)");
}

namespace {

Tensor he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = std * rng.normal();
    return t;
}

Conv make_conv(int cin, int cout, int K, int stride, int pad, Rng& rng) {
    Conv c;
    c.w = he_normal({cout, cin, K}, static_cast<std::size_t>(cin) * K, rng);
    c.b = Tensor::zeros({cout}, true);
    c.stride = stride;
    c.pad = pad;
    return c;
}

Conv make_convT(int cin, int cout, int K, int stride, int pad, Rng& rng) {
    Conv c;
    c.w = he_normal({cin, cout, K}, static_cast<std::size_t>(cin) * K, rng);
    c.b = Tensor::zeros({cout}, true);
    c.stride = stride;
    c.pad = pad;
    return c;
}

Tensor res_apply(Tape& tape, const ResBlock& r, const Tensor& x) {
    Tensor h = relu(tape, conv1d(tape, x, r.c1.w, r.c1.b, r.c1.stride, r.c1.pad));
    h = conv1d(tape, h, r.c2.w, r.c2.b, r.c2.stride, r.c2.pad);
    return relu(tape, add(tape, x, h));
}

} // namespace

std::vector<std::pair<std::string, Tensor>> Model::named_parameters() {
    std::vector<std::pair<std::string, Tensor>> p = {
        {"enc.stem.w", stem.w},     {"enc.stem.b", stem.b},
        {"enc.r1.c1.w", enc_r1.c1.w}, {"enc.r1.c1.b", enc_r1.c1.b},
        {"enc.r1.c2.w", enc_r1.c2.w}, {"enc.r1.c2.b", enc_r1.c2.b},
        {"enc.r2.c1.w", enc_r2.c1.w}, {"enc.r2.c1.b", enc_r2.c1.b},
        {"enc.r2.c2.w", enc_r2.c2.w}, {"enc.r2.c2.b", enc_r2.c2.b},
        {"enc.down1.w", down1.w},   {"enc.down1.b", down1.b},
        {"enc.down2.w", down2.w},   {"enc.down2.b", down2.b},
        {"enc.proj.w", proj_w},     {"enc.proj.b", proj_b},
        {"dec.fc.w", fc_w},         {"dec.fc.b", fc_b},
        {"dec.up1.w", up1.w},       {"dec.up1.b", up1.b},
        {"dec.up2.w", up2.w},       {"dec.up2.b", up2.b},
        {"dec.r1.c1.w", dec_r1.c1.w}, {"dec.r1.c1.b", dec_r1.c1.b},
        {"dec.r1.c2.w", dec_r1.c2.w}, {"dec.r1.c2.b", dec_r1.c2.b},
        {"dec.r2.c1.w", dec_r2.c1.w}, {"dec.r2.c1.b", dec_r2.c1.b},
        {"dec.r2.c2.w", dec_r2.c2.w}, {"dec.r2.c2.b", dec_r2.c2.b},
        {"dec.out.w", out.w},       {"dec.out.b", out.b},
    };
    if (kind == BottleneckKind::VQVAE || kind == BottleneckKind::VQDIFF)
        p.emplace_back("codebook", codebook);
    if (kind == BottleneckKind::VAE) {
        p.emplace_back("vae.mu.w", mu_w);
        p.emplace_back("vae.mu.b", mu_b);
        p.emplace_back("vae.lv.w", lv_w);
        p.emplace_back("vae.lv.b", lv_b);
    }
    return p;
}

std::vector<std::pair<std::string, Tensor>> Model::named_state() {
    auto p = named_parameters();
    if (kind == BottleneckKind::VQEMA) {
        p.emplace_back("codebook", codebook);
        p.emplace_back("ema.counts", ema_counts);
        p.emplace_back("ema.sums", ema_sums);
    }
    return p;
}

Model make_model(BottleneckKind kind, int points, int latent_dim, int codebook_size,
                 const Hyper& hp, Rng& rng) {
    if (points < 4 || points % 4 != 0)
        throw std::invalid_argument("codec: point count " + std::to_string(points) +
                                    " must be a positive multiple of 4");
    if (latent_dim < 1 || codebook_size < 2)
        throw std::invalid_argument("codec: need latent_dim >= 1 and codebook_size >= 2");

    Model m;
    m.kind = kind;
    m.hp = hp;
    m.points = points;
    m.latent_dim = latent_dim;
    m.codebook_size = codebook_size;

    const int C = m.channels;
    const int flat = C * (points / 4);

    m.stem = make_conv(3, C, 3, 1, 1, rng);
    m.enc_r1 = {make_conv(C, C, 3, 1, 1, rng), make_conv(C, C, 3, 1, 1, rng)};
    m.enc_r2 = {make_conv(C, C, 3, 1, 1, rng), make_conv(C, C, 3, 1, 1, rng)};
    m.down1 = make_conv(C, C, 4, 2, 1, rng);
    m.down2 = make_conv(C, C, 4, 2, 1, rng);
    m.proj_w = he_normal({latent_dim, flat}, static_cast<std::size_t>(flat), rng);
    m.proj_b = Tensor::zeros({latent_dim}, true);

    m.fc_w = he_normal({flat, latent_dim}, static_cast<std::size_t>(latent_dim), rng);
    m.fc_b = Tensor::zeros({flat}, true);
    m.up1 = make_convT(C, C, 4, 2, 1, rng);
    m.up2 = make_convT(C, C, 4, 2, 1, rng);
    m.dec_r1 = {make_conv(C, C, 3, 1, 1, rng), make_conv(C, C, 3, 1, 1, rng)};
    m.dec_r2 = {make_conv(C, C, 3, 1, 1, rng), make_conv(C, C, 3, 1, 1, rng)};
    m.out = make_conv(C, 3, 3, 1, 1, rng);

    if (kind == BottleneckKind::VQVAE || kind == BottleneckKind::VQEMA ||
        kind == BottleneckKind::VQDIFF) {
        // e_i ~ N(0, sigma^2) per the Gaussian codebook prior
        m.codebook = Tensor::zeros({codebook_size, latent_dim},
                                   kind != BottleneckKind::VQEMA);
        for (std::size_t i = 0; i < m.codebook.size(); ++i)
            m.codebook.data()[i] = hp.sigma_codebook * rng.normal();
        if (kind == BottleneckKind::VQEMA) {
            m.ema_counts = Tensor::full({codebook_size}, 1.0);
            m.ema_sums = m.codebook.clone().set_requires_grad(false);
        }
    }
    if (kind == BottleneckKind::VAE) {
        m.mu_w = he_normal({latent_dim, latent_dim}, static_cast<std::size_t>(latent_dim), rng);
        m.mu_b = Tensor::zeros({latent_dim}, true);
        m.lv_w = he_normal({latent_dim, latent_dim}, static_cast<std::size_t>(latent_dim), rng);
        m.lv_b = Tensor::zeros({latent_dim}, true);
    }
    return m;
}

Tensor encode(Tape& tape, Model& m, const Tensor& x) {
    if (x.ndim() != 3 || x.dim(1) != 3 || x.dim(2) != m.points)
        throw std::invalid_argument("encode: expected [N,3," + std::to_string(m.points) +
                                    "], got " + shape_str(x.shape()));
    Tensor h = relu(tape, conv1d(tape, x, m.stem.w, m.stem.b, 1, 1));
    h = res_apply(tape, m.enc_r1, h);
    h = res_apply(tape, m.enc_r2, h);
    h = relu(tape, conv1d(tape, h, m.down1.w, m.down1.b, 2, 1));
    h = relu(tape, conv1d(tape, h, m.down2.w, m.down2.b, 2, 1));
    h = reshape(tape, h, {x.dim(0), m.channels * (m.points / 4)});
    return linear(tape, h, m.proj_w, m.proj_b);
}

Tensor decode(Tape& tape, Model& m, const Tensor& code) {
    if (code.ndim() != 2 || code.dim(1) != m.latent_dim)
        throw std::invalid_argument("decode: expected [N," + std::to_string(m.latent_dim) +
                                    "], got " + shape_str(code.shape()));
    Tensor h = relu(tape, linear(tape, code, m.fc_w, m.fc_b));
    h = reshape(tape, h, {code.dim(0), m.channels, m.points / 4});
    h = relu(tape, conv1d_transpose(tape, h, m.up1.w, m.up1.b, 2, 1));
    h = relu(tape, conv1d_transpose(tape, h, m.up2.w, m.up2.b, 2, 1));
    h = res_apply(tape, m.dec_r1, h);
    h = res_apply(tape, m.dec_r2, h);
    return conv1d(tape, h, m.out.w, m.out.b, 1, 1);
}

std::pair<Tensor, Tensor> quantize_vqdiff_noise(Tape& tape, const Tensor& z,
                                                const Tensor& codebook, double beta_temp,
                                                const Tensor* noise) {
    if (!(beta_temp > 0.0))
        throw std::invalid_argument("quantize_vqdiff: beta_temp must be positive");
    Tensor dist = sqdist_rows(tape, z, codebook);
    Tensor logits = scale(tape, dist, -1.0);
    if (noise) logits = add(tape, logits, scale(tape, *noise, beta_temp));
    Tensor w = softmax_temp(tape, logits, beta_temp);
    Tensor s = matmul(tape, w, codebook);
    return {s, w};
}

std::pair<Tensor, Tensor> quantize_vqdiff(Tape& tape, const Tensor& z, const Tensor& codebook,
                                          double beta_temp, Rng& rng, Mode mode) {
    if (mode == Mode::Train) {
        Tensor g = sample_gumbel(rng, {z.dim(0), codebook.dim(0)});
        return quantize_vqdiff_noise(tape, z, codebook, beta_temp, &g);
    }
    return quantize_vqdiff_noise(tape, z, codebook, beta_temp, nullptr);
}

VqvaeOut quantize_vqvae(Tape& tape, const Tensor& z, const Tensor& codebook) {
    const int S = z.dim(0), d = z.dim(1), k = codebook.dim(0);
    if (codebook.dim(1) != d)
        throw std::invalid_argument("quantize_vqvae: latent width " + std::to_string(d) +
                                    " does not match codebook width " +
                                    std::to_string(codebook.dim(1)));
    VqvaeOut out;
    out.assignments.resize(static_cast<std::size_t>(S));
    // argmin by full squared distance; ties break to the lowest index
    const double *pz = z.data(), *pe = codebook.data();
    Tensor onehot = Tensor::zeros({S, k});
    for (int s = 0; s < S; ++s) {
        int best = 0;
        double best_d = 1e300;
        for (int i = 0; i < k; ++i) {
            double acc = 0.0;
            for (int j = 0; j < d; ++j) {
                const double dv = pz[s * d + j] - pe[i * d + j];
                acc += dv * dv;
            }
            if (acc < best_d) {
                best_d = acc;
                best = i;
            }
        }
        out.assignments[static_cast<std::size_t>(s)] = best;
        onehot.data()[static_cast<std::size_t>(s) * k + best] = 1.0;
    }
    // s as a function of the codebook (gradient reaches e via this matmul
    // only when the loss uses `quantized` directly, e.g. the codebook term)
    out.quantized = matmul(tape, onehot, codebook);
    // straight-through: forward value s, backward copies the gradient to z
    out.straight_through = add(tape, z, detach(sub(tape, out.quantized, z)));
    return out;
}

void vqema_update(const Tensor& z, const std::vector<int>& assignments, Tensor& codebook,
                  Tensor& counts, Tensor& sums, double decay, double eps) {
    if (!(decay > 0.0 && decay < 1.0))
        throw std::invalid_argument("vqema_update: decay must be in (0,1)");
    const int S = z.dim(0), d = z.dim(1), k = codebook.dim(0);
    if (static_cast<int>(assignments.size()) != S)
        throw std::invalid_argument("vqema_update: assignment count mismatch");

    std::vector<double> n(static_cast<std::size_t>(k), 0.0);
    std::vector<double> batch_sum(static_cast<std::size_t>(k) * d, 0.0);
    const double* pz = z.data();
    for (int s = 0; s < S; ++s) {
        const int i = assignments[static_cast<std::size_t>(s)];
        n[static_cast<std::size_t>(i)] += 1.0;
        for (int j = 0; j < d; ++j) batch_sum[static_cast<std::size_t>(i) * d + j] += pz[s * d + j];
    }
    double* pc = counts.data();
    double* ps = sums.data();
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        pc[i] = decay * pc[i] + (1.0 - decay) * n[static_cast<std::size_t>(i)];
        total += pc[i];
        for (int j = 0; j < d; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i) * d + j;
            ps[idx] = decay * ps[idx] + (1.0 - decay) * batch_sum[idx];
        }
    }
    double* pe = codebook.data();
    for (int i = 0; i < k; ++i) {
        // Laplace smoothing keeps unused entries finite
        const double smoothed = (pc[i] + eps) / (total + k * eps) * total;
        for (int j = 0; j < d; ++j)
            pe[static_cast<std::size_t>(i) * d + j] = ps[static_cast<std::size_t>(i) * d + j] / smoothed;
    }
}

std::pair<Tensor, Tensor> bottleneck_vae(Tape& tape, const Tensor& mu, const Tensor& logvar,
                                         const Tensor* noise) {
    Tensor z_sampled = mu;
    if (noise) {
        Tensor std_dev = exp_elem(tape, scale(tape, logvar, 0.5));
        z_sampled = add(tape, mu, mul(tape, std_dev, *noise));
    }
    // 1/2 sum(mu^2 + e^lv - 1 - lv), averaged over streamlines
    Tensor term = sub(tape, add_const(tape, add(tape, mul(tape, mu, mu), exp_elem(tape, logvar)), -1.0),
                      logvar);
    Tensor kl = scale(tape, sum(tape, term), 0.5 / static_cast<double>(mu.dim(0)));
    return {z_sampled, kl};
}

BottleneckOut bottleneck(Tape& tape, Model& m, const Tensor& z, Mode mode, Rng* rng) {
    if (mode == Mode::Train && !rng && (m.kind == BottleneckKind::VQDIFF || m.kind == BottleneckKind::VAE))
        throw std::invalid_argument("bottleneck: train mode needs an rng for noise");
    BottleneckOut out;
    out.z = z;
    switch (m.kind) {
        case BottleneckKind::AE: {
            out.code = z;
            break;
        }
        case BottleneckKind::VAE: {
            out.mu = linear(tape, z, m.mu_w, m.mu_b);
            out.logvar = linear(tape, z, m.lv_w, m.lv_b);
            Tensor noise;
            if (mode == Mode::Train) noise = sample_normal(*rng, out.mu.shape());
            auto [zs, kl] = bottleneck_vae(tape, out.mu, out.logvar,
                                           mode == Mode::Train ? &noise : nullptr);
            out.code = zs;
            out.kl_term = kl;
            break;
        }
        case BottleneckKind::VQVAE:
        case BottleneckKind::VQEMA: {
            VqvaeOut q = quantize_vqvae(tape, z, m.codebook);
            out.code = q.straight_through;
            out.quantized = q.quantized;
            out.assignments = std::move(q.assignments);
            break;
        }
        case BottleneckKind::VQDIFF: {
            Tensor noise;
            if (mode == Mode::Train) noise = sample_gumbel(*rng, {z.dim(0), m.codebook.dim(0)});
            auto [s, w] = quantize_vqdiff_noise(tape, z, m.codebook, m.hp.beta_temp,
                                                mode == Mode::Train ? &noise : nullptr);
            out.code = s;
            out.quantized = s;
            out.weights = w;
            break;
        }
    }
    return out;
}

Forward model_forward(Tape& tape, Model& m, const Tensor& x, Mode mode, Rng* rng) {
    Forward f;
    f.z = encode(tape, m, x);
    f.bn = bottleneck(tape, m, f.z, mode, rng);
    f.recon = decode(tape, m, f.bn.code);
    return f;
}

Tensor model_loss(Tape& tape, Model& m, const Forward& fwd, const Tensor& x) {
    Tensor mse = mse_loss(tape, fwd.recon, x);
    switch (m.kind) {
        case BottleneckKind::AE:
        case BottleneckKind::VQDIFF:
            return mse; // no auxiliary terms
        case BottleneckKind::VAE:
            return add(tape, mse, scale(tape, fwd.bn.kl_term, m.hp.lambda_kl));
        case BottleneckKind::VQVAE: {
            Tensor codebook_term = mse_loss(tape, fwd.bn.quantized, detach(fwd.z));
            Tensor commit = mse_loss(tape, fwd.z, detach(fwd.bn.quantized));
            return add(tape, mse, add(tape, codebook_term, scale(tape, commit, m.hp.commitment)));
        }
        case BottleneckKind::VQEMA: {
            Tensor commit = mse_loss(tape, fwd.z, detach(fwd.bn.quantized));
            return add(tape, mse, scale(tape, commit, m.hp.commitment));
        }
    }
    throw std::logic_error("model_loss: unreachable");
}

Tensor bundle_to_tensor(const curves::Bundle& b) {
    const int S = b.size(), P = b.points();
    Tensor t = Tensor::zeros({S, 3, P});
    double* pt = t.data();
    for (int s = 0; s < S; ++s)
        for (int p = 0; p < P; ++p)
            for (int c = 0; c < 3; ++c)
                pt[(static_cast<std::size_t>(s) * 3 + c) * P + p] = b.lines[s].pts[p][c];
    return t;
}

curves::Bundle tensor_to_bundle(const Tensor& t, std::uint32_t label,
                                const std::string& provenance) {
    if (t.ndim() != 3 || t.dim(1) != 3)
        throw std::invalid_argument("tensor_to_bundle: expected [S,3,P], got " +
                                    shape_str(t.shape()));
    const int S = t.dim(0), P = t.dim(2);
    curves::Bundle b;
    b.label = label;
    b.provenance = provenance;
    b.lines.resize(static_cast<std::size_t>(S));
    const double* pt = t.data();
    for (int s = 0; s < S; ++s) {
        b.lines[s].pts.resize(static_cast<std::size_t>(P));
        for (int p = 0; p < P; ++p)
            for (int c = 0; c < 3; ++c)
                b.lines[s].pts[p][c] = pt[(static_cast<std::size_t>(s) * 3 + c) * P + p];
    }
    return b;
}

curves::Bundle reconstruct(Model& m, const curves::Bundle& b) {
    Tape tape(false);
    Tensor x = bundle_to_tensor(b);
    Forward f = model_forward(tape, m, x, Mode::Eval, nullptr);
    return tensor_to_bundle(f.recon, b.label, b.provenance);
}

} // namespace bundlecodec::codec
