#pragma once

#include "bundlecodec/curves.hpp"

#include <functional>
#include <string>
#include <vector>

namespace bundlecodec::metrics {

using curves::Bundle;
using curves::Streamline;

struct BuanConfig {
    double theta = 0.05; // distance threshold in normalized coordinate units
};

// Minimum average direct-flip distance:
// min( mean_i |a_i - b_i|, mean_i |a_i - b_{P-1-i}| ).
// The flipped sum accumulates index pairs (i, P-1-i) together, which makes
// the value bitwise symmetric in its arguments.
double mdf_distance(const Streamline& a, const Streamline& b);

// Symmetric theta-coverage:
// 0.5 * ( |{a : min_b mdf <= theta}|/|A| + |{b : min_a mdf <= theta}|/|B| ).
// Early-exits inside the distance accumulation; decisions are exact.
double bundle_adjacency(const Bundle& A, const Bundle& B, const BuanConfig& cfg);

// Mean squared coordinate error between two equal-shape bundles.
double bundle_mse(const Bundle& a, const Bundle& b);

struct ReconRow {
    std::uint32_t label = 0;
    std::string name;
    int count = 0;
    double mean_buan = 0.0;
    double std_buan = 0.0; // sample standard deviation
    double mean_mse = 0.0;
};

struct ReconReport {
    std::vector<ReconRow> rows;

    double overall_mean_buan() const;
};

using ReconFn = std::function<Bundle(const Bundle&)>;

// Per-class mean +- std of bundle_adjacency(original, reconstruction) plus
// mean MSE, in deterministic label order.
ReconReport recon_report(const ReconFn& recon, const std::vector<Bundle>& bundles,
                         const std::map<std::uint32_t, std::string>& label_names,
                         const BuanConfig& cfg);

std::string format_table(const ReconReport& report);
// One row per class: class,mean_buan,std_buan,mean_mse
void write_csv(const ReconReport& report, const std::string& path);

} // namespace bundlecodec::metrics
