#pragma once

#include "bundlecodec/adam.hpp"
#include "bundlecodec/codec.hpp"
#include "bundlecodec/dataio.hpp"
#include "bundlecodec/metrics.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace bundlecodec::train {

struct TrainConfig {
    codec::BottleneckKind arch = codec::BottleneckKind::AE;
    int iterations = 2000;
    int batch_size = 16; // bundles per iteration, sampled with replacement
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    double beta_temp = 10.0;
    double sigma_codebook = 2.0;
    double lambda_kl = 1.0;
    double commitment = 0.25;
    double ema_decay = 0.99;
    double ema_eps = 1e-5;
    int d = 32;
    int k = 128;
    std::string checkpoint_path;
    std::string log_path;
    int eval_every = 500;

    codec::Hyper hyper() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

// Everything needed to resume bit-exactly: parameters, optimizer moments,
// the training-loop RNG state and the config echo.
struct Checkpoint {
    TrainConfig config;
    codec::Model model;
    diff::AdamState adam;
    std::uint64_t rng_state = 0;
    std::uint64_t completed = 0;
};

// BNC1 file format.
void write_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<double> losses;    // model_loss per iteration
    std::vector<double> recon_mse; // reconstruction term per iteration
};

// Fresh run: seeded init, per-iteration batch sampling / forward / backward /
// Adam step (+ EMA codebook update for VQEMA), CSV loss log, checkpoint at
// eval_every and at the end. Aborts on a non-finite loss naming the
// iteration and the last finite value.
TrainResult train_run(const TrainConfig& config, const curves::Dataset& trainset);

// Continue a loaded checkpoint until config.iterations; bitwise equal to an
// uninterrupted run of the same total length.
TrainResult train_continue(Checkpoint ck, const curves::Dataset& trainset);

struct EvalResult {
    metrics::ReconReport report;
    double mean_loss = 0.0;                  // reconstruction MSE over the split
    std::vector<double> codebook_utilization; // mean weight (or assignment share) per entry
};

EvalResult evaluate_split(Checkpoint& ck, const curves::Dataset& split,
                          const metrics::BuanConfig& cfg);

// One latent record per bundle, deterministic order (BNL1 content).
io::LatentFile export_latents(Checkpoint& ck, const curves::Dataset& ds);

} // namespace bundlecodec::train
