#include "bundlecodec/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace bundlecodec::analysis {

using codec::Mode;
using diff::Rng;
using diff::Tape;
using diff::Tensor;

SweepTable perturb_sweep(train::Checkpoint& ck, const curves::Bundle& bundle,
                         const PerturbSpec& spec, const metrics::BuanConfig& cfg) {
    if (spec.eps_grid.empty()) throw std::invalid_argument("perturb_sweep: empty epsilon grid");
    for (double e : spec.eps_grid)
        if (e < 0.0) throw std::invalid_argument("perturb_sweep: negative epsilon");
    if (!std::is_sorted(spec.eps_grid.begin(), spec.eps_grid.end()))
        throw std::invalid_argument("perturb_sweep: epsilon grid must be ascending");
    if (spec.eps_grid.front() != 0.0)
        throw std::invalid_argument("perturb_sweep: epsilon grid must contain 0");
    if (spec.trials < 1) throw std::invalid_argument("perturb_sweep: trials must be >= 1");

    Tape tape(false);
    Tensor x = codec::bundle_to_tensor(bundle);
    Tensor z = codec::encode(tape, ck.model, x);
    const int S = z.dim(0), d = z.dim(1);

    SweepTable table;
    table.model_tag = codec::kind_name(ck.model.kind);
    table.rows.resize(spec.eps_grid.size());
    for (std::size_t i = 0; i < spec.eps_grid.size(); ++i) table.rows[i].eps = spec.eps_grid[i];

    Rng master(spec.noise_seed);
    for (int trial = 0; trial < spec.trials; ++trial) {
        Rng trial_rng = master.fork(static_cast<std::uint64_t>(trial));
        Tensor eta = diff::sample_normal(trial_rng, {S, d});
        for (std::size_t gi = 0; gi < spec.eps_grid.size(); ++gi) {
            const double eps = spec.eps_grid[gi];
            Tensor zp = diff::add(tape, z, diff::scale(tape, eta, eps));
            codec::BottleneckOut bn = codec::bottleneck(tape, ck.model, zp, Mode::Eval, nullptr);
            Tensor recon = codec::decode(tape, ck.model, bn.code);
            curves::Bundle rb = codec::tensor_to_bundle(recon, bundle.label, bundle.provenance);
            table.rows[gi].mean_buan += metrics::bundle_adjacency(bundle, rb, cfg);
            table.rows[gi].mean_mse += metrics::bundle_mse(bundle, rb);
        }
    }
    for (SweepRow& r : table.rows) {
        r.mean_buan /= spec.trials;
        r.mean_mse /= spec.trials;
    }
    return table;
}

// ---------------------------------------------------------------------------
// PCA via cyclic Jacobi on the covariance

namespace {

void jacobi_eigen(std::vector<double>& a, int n, std::vector<double>& vecs) {
    // a: n x n symmetric, destroyed; vecs: receives eigenvectors as columns
    vecs.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) vecs[static_cast<std::size_t>(i) * n + i] = 1.0;
    auto at = [&](int r, int c) -> double& { return a[static_cast<std::size_t>(r) * n + c]; };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += at(p, q) * at(p, q);
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(at(p, q)) < 1e-300) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * at(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = at(i, p), aiq = at(i, q);
                    at(i, p) = c * aip - s * aiq;
                    at(i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = at(p, i), aqi = at(q, i);
                    at(p, i) = c * api - s * aqi;
                    at(q, i) = s * api + c * aqi;
                }
                for (int i = 0; i < n; ++i) {
                    const double vip = vecs[static_cast<std::size_t>(i) * n + p];
                    const double viq = vecs[static_cast<std::size_t>(i) * n + q];
                    vecs[static_cast<std::size_t>(i) * n + p] = c * vip - s * viq;
                    vecs[static_cast<std::size_t>(i) * n + q] = s * vip + c * viq;
                }
            }
        }
    }
}

} // namespace

PcaResult pca_project(const std::vector<double>& latents, int n, int d) {
    if (n < 2) throw std::invalid_argument("pca_project: need at least 2 rows");
    if (latents.size() != static_cast<std::size_t>(n) * d)
        throw std::invalid_argument("pca_project: buffer size does not match n x d");

    PcaResult res;
    res.n = n;
    res.d = d;
    res.mean.assign(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) res.mean[static_cast<std::size_t>(j)] += latents[static_cast<std::size_t>(i) * d + j];
    for (double& m : res.mean) m /= n;

    std::vector<double> cov(static_cast<std::size_t>(d) * d, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) {
            const double xj = latents[static_cast<std::size_t>(i) * d + j] - res.mean[static_cast<std::size_t>(j)];
            for (int l = j; l < d; ++l) {
                const double xl = latents[static_cast<std::size_t>(i) * d + l] - res.mean[static_cast<std::size_t>(l)];
                cov[static_cast<std::size_t>(j) * d + l] += xj * xl;
            }
        }
    double trace = 0.0;
    for (int j = 0; j < d; ++j) {
        for (int l = j; l < d; ++l) {
            cov[static_cast<std::size_t>(j) * d + l] /= (n - 1);
            cov[static_cast<std::size_t>(l) * d + j] = cov[static_cast<std::size_t>(j) * d + l];
        }
        trace += cov[static_cast<std::size_t>(j) * d + j];
    }

    res.coords.assign(static_cast<std::size_t>(n) * 2, 0.0);
    res.components.assign(static_cast<std::size_t>(2) * d, 0.0);
    if (trace <= 1e-300) {
        res.degenerate = true;
        std::cerr << "pca_project: zero-variance input, coordinates are all zero\n";
        return res;
    }

    std::vector<double> vecs;
    jacobi_eigen(cov, d, vecs);
    // eigenvalues are now on the diagonal
    std::vector<std::pair<double, int>> eig(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) eig[static_cast<std::size_t>(j)] = {cov[static_cast<std::size_t>(j) * d + j], j};
    std::sort(eig.begin(), eig.end(), [](auto& a, auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    for (int comp = 0; comp < 2 && comp < d; ++comp) {
        const int col = eig[static_cast<std::size_t>(comp)].second;
        double maxmag = 0.0;
        int arg = 0;
        for (int j = 0; j < d; ++j) {
            const double v = vecs[static_cast<std::size_t>(j) * d + col];
            if (std::abs(v) > maxmag) {
                maxmag = std::abs(v);
                arg = j;
            }
        }
        const double sign = vecs[static_cast<std::size_t>(arg) * d + col] < 0.0 ? -1.0 : 1.0;
        for (int j = 0; j < d; ++j)
            res.components[static_cast<std::size_t>(comp) * d + j] =
                sign * vecs[static_cast<std::size_t>(j) * d + col];
        res.explained[static_cast<std::size_t>(comp)] =
            std::max(0.0, eig[static_cast<std::size_t>(comp)].first) / trace;
    }

    for (int i = 0; i < n; ++i)
        for (int comp = 0; comp < 2; ++comp) {
            double acc = 0.0;
            for (int j = 0; j < d; ++j)
                acc += (latents[static_cast<std::size_t>(i) * d + j] - res.mean[static_cast<std::size_t>(j)]) *
                       res.components[static_cast<std::size_t>(comp) * d + j];
            res.coords[static_cast<std::size_t>(i) * 2 + comp] = acc;
        }
    return res;
}

// ---------------------------------------------------------------------------
// emission

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("analysis: cannot write " + path);
    return f;
}

const char* kPalette[8] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                           "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

} // namespace

void write_sweep_csv(const SweepTable& table, const std::string& path) {
    auto f = open_out(path);
    f << "eps,mean_buan,mean_mse\n";
    char buf[128];
    for (const SweepRow& r : table.rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", r.eps, r.mean_buan, r.mean_mse);
        f << buf;
    }
}

void write_sweep_svg(const SweepTable& table, const std::string& path) {
    auto f = open_out(path);
    const int W = 480, H = 320, ml = 50, mb = 40, mt = 30, mr = 15;
    double xmax = 1e-12, ymax = 1e-12;
    for (const SweepRow& r : table.rows) {
        xmax = std::max(xmax, r.eps);
        ymax = std::max(ymax, 1.0); // BUAN axis is [0,1]
    }
    auto px = [&](double e) { return ml + (W - ml - mr) * (xmax > 0 ? e / xmax : 0.0); };
    auto py = [&](double b) { return H - mb - (H - mb - mt) * (b / ymax); };
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\">\n";
    f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    f << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">"
      << table.model_tag << " perturbation sweep</text>\n";
    f << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
      << H - mb << "\" stroke=\"black\"/>\n";
    f << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
    f << "<text x=\"" << W / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\" font-size=\"11\">epsilon</text>\n";
    f << "<text x=\"14\" y=\"" << H / 2 << "\" font-size=\"11\" transform=\"rotate(-90 14 "
      << H / 2 << ")\" text-anchor=\"middle\">mean BUAN</text>\n";
    f << "<polyline fill=\"none\" stroke=\"" << kPalette[0] << "\" stroke-width=\"2\" points=\"";
    char buf[64];
    for (const SweepRow& r : table.rows) {
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(r.eps), py(r.mean_buan));
        f << buf;
    }
    f << "\"/>\n";
    for (const SweepRow& r : table.rows) {
        std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n",
                      px(r.eps), py(r.mean_buan), kPalette[0]);
        f << buf;
    }
    f << "</svg>\n";
}

void write_scatter_csv(const std::vector<ScatterPoint>& pts, const std::string& path) {
    auto f = open_out(path);
    f << "x,y,label\n";
    char buf[128];
    for (const ScatterPoint& p : pts) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%u\n", p.x, p.y, p.label);
        f << buf;
    }
}

void write_scatter_svg(const std::vector<ScatterPoint>& pts, const std::string& path,
                       const std::string& title) {
    auto f = open_out(path);
    const int W = 480, H = 480, m = 40;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const ScatterPoint& p : pts) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    if (pts.empty() || xmax - xmin < 1e-12) {
        xmin = -1;
        xmax = 1;
    }
    if (pts.empty() || ymax - ymin < 1e-12) {
        ymin = -1;
        ymax = 1;
    }
    auto px = [&](double x) { return m + (W - 2 * m) * (x - xmin) / (xmax - xmin); };
    auto py = [&](double y) { return H - m - (H - 2 * m) * (y - ymin) / (ymax - ymin); };
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    f << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << title
      << "</text>\n";
    char buf[96];
    for (const ScatterPoint& p : pts) {
        std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2\" fill=\"%s\"/>\n",
                      px(p.x), py(p.y), kPalette[p.label % 8]);
        f << buf;
    }
    f << "</svg>\n";
}

} // namespace bundlecodec::analysis
