#pragma once

#include "bundlecodec/curves.hpp"
#include "bundlecodec/ops.hpp"

#include <string>
#include <utility>
#include <vector>

namespace bundlecodec::codec {

using diff::Rng;
using diff::Tape;
using diff::Tensor;

enum class BottleneckKind { AE, VAE, VQVAE, VQEMA, VQDIFF };

const char* kind_name(BottleneckKind k);
BottleneckKind kind_from_name(const std::string& name);

struct Hyper {
    double beta_temp = 10.0;      // Gumbel scale and softmax temperature
    double sigma_codebook = 2.0;  // codebook init std dev
    double lambda_kl = 1.0;       // VAE KL weight
    double commitment = 0.25;     // VQ commitment weight
    double ema_decay = 0.99;
    double ema_eps = 1e-5;
};

struct Conv {
    Tensor w, b;
    int stride = 1, pad = 1;
};

struct ResBlock {
    Conv c1, c2; // conv-ReLU-conv plus identity skip
};

// Shared residual encoder/decoder with one of five interchangeable
// bottlenecks. Streamlines are processed independently with shared weights:
// any [N,3,P] batch works, N need not equal the bundle group size.
struct Model {
    BottleneckKind kind = BottleneckKind::AE;
    Hyper hp;
    int points = 64;       // P, divisible by 4
    int channels = 32;
    int latent_dim = 32;   // d
    int codebook_size = 128; // k

    Conv stem;             // 3 -> C, K3 p1
    ResBlock enc_r1, enc_r2;
    Conv down1, down2;     // stride 2, K4 p1: P -> P/2 -> P/4
    Tensor proj_w, proj_b; // C*(P/4) -> d

    Tensor fc_w, fc_b;     // d -> C*(P/4)
    Conv up1, up2;         // transposed, stride 2, K4 p1
    ResBlock dec_r1, dec_r2;
    Conv out;              // C -> 3, K3 p1

    Tensor codebook;       // [k,d], trainable for VQVAE/VQDIFF
    Tensor mu_w, mu_b, lv_w, lv_b; // VAE heads, d -> d
    Tensor ema_counts, ema_sums;   // VQEMA running stats: [k], [k,d]

    // Gradient-trained tensors in a fixed order (excludes the codebook for
    // VQEMA, where it moves by running averages only).
    std::vector<std::pair<std::string, Tensor>> named_parameters();
    // Everything a checkpoint must carry (parameters + EMA state).
    std::vector<std::pair<std::string, Tensor>> named_state();
};

Model make_model(BottleneckKind kind, int points, int latent_dim, int codebook_size,
                 const Hyper& hp, Rng& rng);

enum class Mode { Train, Eval };

// Encoder trunk: [N,3,P] -> [N,d], one latent per streamline.
Tensor encode(Tape& tape, Model& m, const Tensor& x);

// Decoder: [N,d] -> [N,3,P]; deterministic, permutation-equivariant.
Tensor decode(Tape& tape, Model& m, const Tensor& code);

struct BottleneckOut {
    Tensor z;           // pre-bottleneck latents (pass-through)
    Tensor code;        // what the decoder consumes
    Tensor weights;     // VQDIFF: [N,k] Gumbel-softmax weights
    Tensor quantized;   // VQ kinds: s (codebook combination / selection)
    std::vector<int> assignments; // VQVAE/VQEMA argmin indices
    Tensor kl_term;     // VAE: scalar
    Tensor mu, logvar;  // VAE heads
};

// Applies the model's own bottleneck to latents z. rng supplies train-mode
// noise (Gumbel / VAE); pass nullptr in eval mode.
BottleneckOut bottleneck(Tape& tape, Model& m, const Tensor& z, Mode mode, Rng* rng);

struct Forward {
    Tensor z, recon;
    BottleneckOut bn;
};

Forward model_forward(Tape& tape, Model& m, const Tensor& x, Mode mode, Rng* rng);

// Reconstruction objective per architecture. VQDIFF returns the plain MSE
// node itself: the constant-KL result removes every auxiliary term.
Tensor model_loss(Tape& tape, Model& m, const Forward& fwd, const Tensor& x);

// ---- the individual quantizers -------------------------------------------

// Gumbel-weighted differentiable quantization: logits_i = -|z - e_i|^2,
// train: w = softmax((logits + beta*g)/beta) with unit Gumbel g,
// eval:  w = softmax(logits/beta). Returns (s = w E, w).
std::pair<Tensor, Tensor> quantize_vqdiff(Tape& tape, const Tensor& z, const Tensor& codebook,
                                          double beta_temp, Rng& rng, Mode mode);
// Same with caller-supplied noise (fixed noise makes the map deterministic,
// which the gradient checks need). noise == nullptr means eval weights.
std::pair<Tensor, Tensor> quantize_vqdiff_noise(Tape& tape, const Tensor& z,
                                                const Tensor& codebook, double beta_temp,
                                                const Tensor* noise);

struct VqvaeOut {
    Tensor straight_through; // z + sg[s - z]: decoder input
    Tensor quantized;        // s as a function of the codebook (for aux losses)
    std::vector<int> assignments;
};

// Nearest-codebook selection with the straight-through backward contract;
// argmin ties break to the lowest index.
VqvaeOut quantize_vqvae(Tape& tape, const Tensor& z, const Tensor& codebook);

// EMA codebook update: counts <- g*counts + (1-g)*n, sums <- g*sums + (1-g)*sum(z),
// e_i = sums_i / counts_i with Laplace smoothing on the counts.
void vqema_update(const Tensor& z, const std::vector<int>& assignments, Tensor& codebook,
                  Tensor& counts, Tensor& sums, double decay, double eps);

// (z_sampled, kl_term). noise == nullptr (eval) gives z_sampled = mu.
// kl_term = 1/2 sum(mu^2 + e^lv - 1 - lv) / N.
std::pair<Tensor, Tensor> bottleneck_vae(Tape& tape, const Tensor& mu, const Tensor& logvar,
                                         const Tensor* noise);

// ---- bundle adapters -------------------------------------------------------

Tensor bundle_to_tensor(const curves::Bundle& b);
curves::Bundle tensor_to_bundle(const Tensor& t, std::uint32_t label,
                                const std::string& provenance);

// Eval-mode reconstruction of one bundle (pure function of the frozen model).
curves::Bundle reconstruct(Model& m, const curves::Bundle& b);

} // namespace bundlecodec::codec
