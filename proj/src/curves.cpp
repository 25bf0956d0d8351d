#include "bundlecodec/curves.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace bundlecodec::curves {

namespace {

double dist3(const Point& a, const Point& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

void check_streamline(const char* op, const Streamline& s) {
    if (s.points() < 2)
        throw std::invalid_argument(std::string(op) + ": streamline needs >= 2 points, got " +
                                    std::to_string(s.points()));
    for (const Point& p : s.pts)
        for (double v : p)
            if (!std::isfinite(v))
                throw std::invalid_argument(std::string(op) + ": non-finite coordinate");
}

} // namespace

double streamline_length(const Streamline& s) {
    double len = 0.0;
    for (std::size_t i = 1; i < s.pts.size(); ++i) len += dist3(s.pts[i], s.pts[i - 1]);
    return len;
}

Streamline resample_arclength(const Streamline& s, int P, bool* degenerate) {
    if (P < 2) throw std::invalid_argument("resample_arclength: P must be >= 2");
    check_streamline("resample_arclength", s);
    if (degenerate) *degenerate = false;

    const int n = s.points();
    std::vector<double> cum(static_cast<std::size_t>(n), 0.0);
    for (int i = 1; i < n; ++i) cum[i] = cum[i - 1] + dist3(s.pts[i], s.pts[i - 1]);
    const double total = cum[n - 1];

    Streamline out;
    out.pts.resize(static_cast<std::size_t>(P));
    if (total <= 0.0) {
        if (degenerate) *degenerate = true;
        std::cerr << "resample_arclength: zero-length streamline, replicating point\n";
        for (int i = 0; i < P; ++i) out.pts[i] = s.pts[0];
        return out;
    }

    out.pts[0] = s.pts[0];
    out.pts[P - 1] = s.pts[n - 1];
    int seg = 0;
    for (int i = 1; i < P - 1; ++i) {
        const double target = total * static_cast<double>(i) / static_cast<double>(P - 1);
        while (seg < n - 2 && cum[seg + 1] < target) ++seg;
        const double seg_len = cum[seg + 1] - cum[seg];
        const double t = seg_len > 0.0 ? (target - cum[seg]) / seg_len : 0.0;
        for (int c = 0; c < 3; ++c)
            out.pts[i][c] = s.pts[seg][c] + t * (s.pts[seg + 1][c] - s.pts[seg][c]);
    }
    return out;
}

NormStats compute_norm_stats(const std::vector<Bundle>& train) {
    if (train.empty()) throw std::invalid_argument("normalize: empty training set");
    NormStats st;
    double cx = 0, cy = 0, cz = 0;
    std::size_t n = 0;
    for (const Bundle& b : train)
        for (const Streamline& s : b.lines)
            for (const Point& p : s.pts) {
                cx += p[0];
                cy += p[1];
                cz += p[2];
                ++n;
            }
    if (n == 0) throw std::invalid_argument("normalize: training set has no points");
    st.centroid = {cx / static_cast<double>(n), cy / static_cast<double>(n),
                   cz / static_cast<double>(n)};
    double maxabs = 0.0;
    for (const Bundle& b : train)
        for (const Streamline& s : b.lines)
            for (const Point& p : s.pts)
                for (int c = 0; c < 3; ++c)
                    maxabs = std::max(maxabs, std::abs(p[c] - st.centroid[c]));
    st.scale = maxabs > 0.0 ? maxabs : 1.0;
    return st;
}

void apply_norm(Bundle& b, const NormStats& st) {
    for (Streamline& s : b.lines)
        for (Point& p : s.pts)
            for (int c = 0; c < 3; ++c) p[c] = (p[c] - st.centroid[c]) / st.scale;
}

void invert_norm(Bundle& b, const NormStats& st) {
    for (Streamline& s : b.lines)
        for (Point& p : s.pts)
            for (int c = 0; c < 3; ++c) p[c] = p[c] * st.scale + st.centroid[c];
}

NormStats normalize_splits(std::vector<Bundle>& train, std::vector<Bundle>& val) {
    NormStats st = compute_norm_stats(train);
    for (Bundle& b : train) apply_norm(b, st);
    for (Bundle& b : val) apply_norm(b, st);
    return st;
}

std::vector<Bundle> make_groups(std::vector<Streamline> streamlines, std::uint32_t label,
                                const std::string& provenance, int group_size, diff::Rng& rng) {
    if (group_size < 1) throw std::invalid_argument("make_groups: group_size must be >= 1");
    const std::size_t n = streamlines.size();
    if (n < static_cast<std::size_t>(group_size)) {
        std::cerr << "make_groups: " << n << " streamlines < group size " << group_size
                  << ", dropping all\n";
        return {};
    }
    // Fisher-Yates with the supplied stream
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = rng.below(i + 1);
        std::swap(streamlines[i], streamlines[j]);
    }
    std::vector<Bundle> out;
    const std::size_t groups = n / static_cast<std::size_t>(group_size);
    out.reserve(groups);
    for (std::size_t g = 0; g < groups; ++g) {
        Bundle b;
        b.label = label;
        b.provenance = provenance;
        b.lines.assign(streamlines.begin() + static_cast<std::ptrdiff_t>(g * group_size),
                       streamlines.begin() + static_cast<std::ptrdiff_t>((g + 1) * group_size));
        out.push_back(std::move(b));
    }
    return out;
}

const char* family_kind_name(FamilyKind k) {
    switch (k) {
        case FamilyKind::Arc: return "arc";
        case FamilyKind::UShape: return "ushape";
        case FamilyKind::Helix: return "helix";
        case FamilyKind::SCurve: return "scurve";
        case FamilyKind::Fan: return "fan";
    }
    return "unknown";
}

std::string SynthFamily::name() const {
    return std::string(family_kind_name(kind)) + "_" + std::to_string(id);
}

SynthFamily default_family(int id) {
    SynthFamily f;
    f.id = id;
    f.kind = static_cast<FamilyKind>(id % 5);
    f.center = {4.0 * id, 0.0, 0.0};
    return f;
}

Streamline family_template(const SynthFamily& fam, int n) {
    Streamline s;
    s.pts.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n - 1);
        Point p{0, 0, 0};
        switch (fam.kind) {
            case FamilyKind::Arc: { // quarter circle, radius 1
                const double a = t * 1.5707963267948966;
                p = {std::cos(a), std::sin(a), 0.0};
                break;
            }
            case FamilyKind::UShape: {
                const double x = 2.0 * t - 1.0;
                p = {x, x * x, 0.2 * x};
                break;
            }
            case FamilyKind::Helix: {
                const double a = t * 4.71238898038469; // 3/2 turns worth of angle
                p = {0.7 * std::cos(a), 0.7 * std::sin(a), t};
                break;
            }
            case FamilyKind::SCurve: {
                p = {2.0 * t - 1.0, 0.6 * std::sin(2.0 * 3.141592653589793 * t), 0.0};
                break;
            }
            case FamilyKind::Fan: {
                p = {2.0 * t - 1.0, 0.5 * t, 0.3 * t};
                break;
            }
        }
        for (int c = 0; c < 3; ++c) s.pts[i][c] = p[c] + fam.center[c];
    }
    return s;
}

Bundle synth_bundle(const SynthFamily& fam, int S, int P, double noise, diff::Rng& rng) {
    if (S < 2 || P < 2) throw std::invalid_argument("synth_bundle: S and P must be >= 2");
    if (noise < 0.0) throw std::invalid_argument("synth_bundle: noise must be >= 0");
    const int tmpl_n = std::max(P, 96);
    const Streamline tmpl = family_template(fam, tmpl_n);

    Point centroid{0, 0, 0};
    for (const Point& p : tmpl.pts)
        for (int c = 0; c < 3; ++c) centroid[c] += p[c] / tmpl_n;

    Bundle b;
    b.label = static_cast<std::uint32_t>(fam.id);
    b.provenance = fam.name();
    b.lines.reserve(static_cast<std::size_t>(S));
    const double two_pi = 6.283185307179586;
    for (int si = 0; si < S; ++si) {
        // 3 random-phase harmonics per axis, amplitude decaying with order
        double amp[3][3], phase[3][3];
        for (int c = 0; c < 3; ++c)
            for (int h = 0; h < 3; ++h) {
                amp[c][h] = noise * fam.dispersion * rng.uniform() / static_cast<double>(h + 1);
                phase[c][h] = rng.uniform_range(0.0, two_pi);
            }
        // rigid jitter: small rotation about a random axis + translation
        Point axis{rng.normal(), rng.normal(), rng.normal()};
        const double an = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
        for (int c = 0; c < 3; ++c) axis[c] = an > 0 ? axis[c] / an : 0.0;
        const double angle = noise * fam.jitter_rotate * rng.uniform_range(-1.0, 1.0);
        Point shift{};
        for (int c = 0; c < 3; ++c)
            shift[c] = noise * fam.jitter_translate * rng.uniform_range(-1.0, 1.0);

        const double ca = std::cos(angle), sa = std::sin(angle);
        Streamline line;
        line.pts.resize(static_cast<std::size_t>(tmpl_n));
        for (int i = 0; i < tmpl_n; ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(tmpl_n - 1);
            Point p = tmpl.pts[static_cast<std::size_t>(i)];
            for (int c = 0; c < 3; ++c)
                for (int h = 0; h < 3; ++h)
                    p[c] += amp[c][h] * std::sin(two_pi * (h + 1) * t + phase[c][h]);
            // Rodrigues rotation about the template centroid
            Point q{p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]};
            const double dotaq = axis[0] * q[0] + axis[1] * q[1] + axis[2] * q[2];
            Point cross{axis[1] * q[2] - axis[2] * q[1], axis[2] * q[0] - axis[0] * q[2],
                        axis[0] * q[1] - axis[1] * q[0]};
            for (int c = 0; c < 3; ++c)
                p[c] = centroid[c] + q[c] * ca + cross[c] * sa + axis[c] * dotaq * (1.0 - ca) +
                       shift[c];
            line.pts[static_cast<std::size_t>(i)] = p;
        }
        b.lines.push_back(resample_arclength(line, P));
    }
    return b;
}

Dataset synth_dataset(int families, int bundles_per_family, int S, int P, double noise,
                      std::uint64_t seed) {
    if (families < 1) throw std::invalid_argument("synth_dataset: families must be >= 1");
    Dataset ds;
    ds.group_size = static_cast<std::uint32_t>(S);
    ds.point_count = static_cast<std::uint32_t>(P);
    diff::Rng master(seed);
    for (int f = 0; f < families; ++f) {
        const SynthFamily fam = default_family(f);
        ds.label_names[static_cast<std::uint32_t>(f)] = fam.name();
        for (int i = 0; i < bundles_per_family; ++i) {
            diff::Rng sub = master.fork(static_cast<std::uint64_t>(f) * 1000003ULL +
                                        static_cast<std::uint64_t>(i));
            Bundle b = synth_bundle(fam, S, P, noise, sub);
            b.provenance = fam.name() + "/b" + std::to_string(i);
            ds.bundles.push_back(std::move(b));
        }
    }
    return ds;
}

} // namespace bundlecodec::curves
