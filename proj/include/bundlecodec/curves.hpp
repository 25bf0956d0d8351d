#pragma once

#include "bundlecodec/rng.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace bundlecodec::curves {

using Point = std::array<double, 3>;

// A 3-D polyline. P >= 2 except for the degenerate replicate case.
struct Streamline {
    std::vector<Point> pts;

    int points() const { return static_cast<int>(pts.size()); }
};

// Fixed-size group of streamlines sharing a class label and provenance.
struct Bundle {
    std::uint32_t label = 0;
    std::string provenance;
    std::vector<Streamline> lines;

    int size() const { return static_cast<int>(lines.size()); }
    int points() const { return lines.empty() ? 0 : lines.front().points(); }
};

struct Dataset {
    std::vector<Bundle> bundles;
    std::map<std::uint32_t, std::string> label_names;
    std::uint32_t group_size = 64;
    std::uint32_t point_count = 64;
};

double streamline_length(const Streamline& s);

// Resamples onto P points at equal cumulative arc-length fractions along the
// piecewise-linear curve; endpoints are preserved exactly. A zero-length
// input replicates its first point P times and sets *degenerate.
Streamline resample_arclength(const Streamline& s, int P, bool* degenerate = nullptr);

// Global training-set centroid and max-abs scale (computed after centering).
struct NormStats {
    Point centroid{0, 0, 0};
    double scale = 1.0;
};

NormStats compute_norm_stats(const std::vector<Bundle>& train);
void apply_norm(Bundle& b, const NormStats& st);
void invert_norm(Bundle& b, const NormStats& st);
// Stats from the train split, applied verbatim to both splits.
NormStats normalize_splits(std::vector<Bundle>& train, std::vector<Bundle>& val);

// Deterministic shuffle, partition into groups of exactly group_size,
// remainder dropped. Returns an empty list (with a warning) when fewer than
// group_size streamlines exist.
std::vector<Bundle> make_groups(std::vector<Streamline> streamlines, std::uint32_t label,
                                const std::string& provenance, int group_size, diff::Rng& rng);

enum class FamilyKind { Arc, UShape, Helix, SCurve, Fan };

const char* family_kind_name(FamilyKind k);

// Parametric template plus dispersion/jitter ranges; every generated
// magnitude scales with the caller's noise level, so noise 0 reproduces the
// template exactly.
struct SynthFamily {
    int id = 0;
    FamilyKind kind = FamilyKind::Arc;
    Point center{0, 0, 0};
    double dispersion = 1.0;      // smooth displacement amplitude at noise 1
    double jitter_translate = 0.3;
    double jitter_rotate = 0.2;   // radians at noise 1

    std::string name() const;
};

// Well-separated default families (centers 4 apart on the x axis).
SynthFamily default_family(int id);

// Template curve of the family sampled at n points.
Streamline family_template(const SynthFamily& fam, int n);

// S streamlines: template + smooth per-streamline sinusoidal displacement
// (3 random-phase harmonics per axis) + small rigid jitter, resampled to P.
Bundle synth_bundle(const SynthFamily& fam, int S, int P, double noise, diff::Rng& rng);

Dataset synth_dataset(int families, int bundles_per_family, int S, int P, double noise,
                      std::uint64_t seed);

} // namespace bundlecodec::curves
