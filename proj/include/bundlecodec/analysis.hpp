#pragma once

#include "bundlecodec/metrics.hpp"
#include "bundlecodec/trainer.hpp"

#include <array>
#include <string>
#include <vector>

namespace bundlecodec::analysis {

struct PerturbSpec {
    std::vector<double> eps_grid = {0.0, 0.1, 0.25, 0.5, 1.0}; // ascending, contains 0
    std::uint64_t noise_seed = 0;
    int trials = 10;
};

struct SweepRow {
    double eps = 0.0;
    double mean_buan = 0.0;
    double mean_mse = 0.0;
};

struct SweepTable {
    std::string model_tag;
    std::vector<SweepRow> rows;
};

// Perturbs every pre-bottleneck latent of the bundle (z -> z + eps * eta,
// eta ~ N(0, I_d) per streamline, drawn once per trial so the grid shares
// noise directions), runs the model's own bottleneck + decoder, and averages
// BUAN(original, reconstruction) and MSE over trials per epsilon.
SweepTable perturb_sweep(train::Checkpoint& ck, const curves::Bundle& bundle,
                         const PerturbSpec& spec, const metrics::BuanConfig& cfg);

struct PcaResult {
    int n = 0, d = 0;
    std::vector<double> coords;        // n x 2
    std::array<double, 2> explained{}; // variance fractions of the two components
    std::vector<double> components;    // 2 x d, orthonormal rows
    std::vector<double> mean;          // d
    bool degenerate = false;           // zero-variance input
};

// Mean-centered projection onto the top-2 principal directions (Jacobi
// eigendecomposition of the d x d covariance). Deterministic sign convention:
// the largest-magnitude coordinate of each component is made positive.
PcaResult pca_project(const std::vector<double>& latents, int n, int d);

// ---- emission ---------------------------------------------------------------

struct ScatterPoint {
    double x = 0.0, y = 0.0;
    std::uint32_t label = 0;
};

void write_sweep_csv(const SweepTable& table, const std::string& path);
void write_sweep_svg(const SweepTable& table, const std::string& path);
void write_scatter_csv(const std::vector<ScatterPoint>& pts, const std::string& path);
void write_scatter_svg(const std::vector<ScatterPoint>& pts, const std::string& path,
                       const std::string& title);

} // namespace bundlecodec::analysis
