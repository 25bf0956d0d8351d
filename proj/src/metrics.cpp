#include "bundlecodec/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace bundlecodec::metrics {

namespace {

inline double dist3(const curves::Point& a, const curves::Point& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

void check_pair(const char* op, const Streamline& a, const Streamline& b) {
    if (a.points() != b.points())
        throw std::invalid_argument(std::string(op) + ": point counts differ, " +
                                    std::to_string(a.points()) + " vs " +
                                    std::to_string(b.points()));
    if (a.points() < 1) throw std::invalid_argument(std::string(op) + ": empty streamline");
}

// Direct and flipped sums; the flipped sum adds the (i, P-1-i) pair terms
// together so both argument orders accumulate identically.
// limit < 0 disables early exit; otherwise stops once both sums exceed it.
inline void mdf_sums(const Streamline& a, const Streamline& b, double limit, double& direct,
                     double& flipped) {
    const int P = a.points();
    direct = 0.0;
    flipped = 0.0;
    const int half = P / 2;
    for (int i = 0; i < half; ++i) {
        const int j = P - 1 - i;
        direct += dist3(a.pts[i], b.pts[i]) + dist3(a.pts[j], b.pts[j]);
        flipped += dist3(a.pts[i], b.pts[j]) + dist3(a.pts[j], b.pts[i]);
        if (limit >= 0.0 && direct > limit && flipped > limit) return;
    }
    if (P & 1) {
        const int m = half;
        direct += dist3(a.pts[m], b.pts[m]);
        flipped += dist3(a.pts[m], b.pts[m]);
    }
}

inline bool mdf_within(const Streamline& a, const Streamline& b, double limit_sum) {
    double direct, flipped;
    mdf_sums(a, b, limit_sum, direct, flipped);
    return std::min(direct, flipped) <= limit_sum;
}

} // namespace

double mdf_distance(const Streamline& a, const Streamline& b) {
    check_pair("mdf_distance", a, b);
    double direct, flipped;
    mdf_sums(a, b, -1.0, direct, flipped);
    return std::min(direct, flipped) / static_cast<double>(a.points());
}

double bundle_adjacency(const Bundle& A, const Bundle& B, const BuanConfig& cfg) {
    if (A.lines.empty() || B.lines.empty())
        throw std::invalid_argument("bundle_adjacency: empty bundle");
    if (!(cfg.theta > 0.0))
        throw std::invalid_argument("bundle_adjacency: theta must be positive");
    const int P = A.points();
    for (const Streamline& s : A.lines) check_pair("bundle_adjacency", A.lines.front(), s);
    for (const Streamline& s : B.lines) check_pair("bundle_adjacency", A.lines.front(), s);

    const double limit_sum = cfg.theta * static_cast<double>(P);
    auto coverage = [&](const Bundle& from, const Bundle& to) {
        int covered = 0;
        for (const Streamline& s : from.lines) {
            for (const Streamline& t : to.lines) {
                if (mdf_within(s, t, limit_sum)) {
                    ++covered;
                    break;
                }
            }
        }
        return static_cast<double>(covered) / static_cast<double>(from.lines.size());
    };
    return 0.5 * (coverage(A, B) + coverage(B, A));
}

double bundle_mse(const Bundle& a, const Bundle& b) {
    if (a.size() != b.size() || a.points() != b.points())
        throw std::invalid_argument("bundle_mse: shape mismatch");
    double s = 0.0;
    std::size_t n = 0;
    for (int i = 0; i < a.size(); ++i)
        for (int p = 0; p < a.points(); ++p)
            for (int c = 0; c < 3; ++c) {
                const double d = a.lines[i].pts[p][c] - b.lines[i].pts[p][c];
                s += d * d;
                ++n;
            }
    return s / static_cast<double>(n);
}

double ReconReport::overall_mean_buan() const {
    double s = 0.0;
    int n = 0;
    for (const ReconRow& r : rows) {
        s += r.mean_buan * r.count;
        n += r.count;
    }
    return n ? s / n : 0.0;
}

ReconReport recon_report(const ReconFn& recon, const std::vector<Bundle>& bundles,
                         const std::map<std::uint32_t, std::string>& label_names,
                         const BuanConfig& cfg) {
    ReconReport report;
    for (const auto& [label, name] : label_names) {
        ReconRow row;
        row.label = label;
        row.name = name;
        std::vector<double> buans;
        double mse_sum = 0.0;
        for (const Bundle& b : bundles) {
            if (b.label != label) continue;
            const Bundle r = recon(b);
            buans.push_back(bundle_adjacency(b, r, cfg));
            mse_sum += bundle_mse(b, r);
        }
        if (buans.empty()) {
            std::cerr << "recon_report: class " << name << " has no bundles, skipping\n";
            continue;
        }
        row.count = static_cast<int>(buans.size());
        double mean = 0.0;
        for (double v : buans) mean += v;
        mean /= row.count;
        double var = 0.0;
        for (double v : buans) var += (v - mean) * (v - mean);
        row.mean_buan = mean;
        row.std_buan = row.count > 1 ? std::sqrt(var / (row.count - 1)) : 0.0;
        row.mean_mse = mse_sum / row.count;
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string format_table(const ReconReport& report) {
    std::ostringstream os;
    os << "class            n   mean_buan  std_buan   mean_mse\n";
    char buf[128];
    for (const ReconRow& r : report.rows) {
        std::snprintf(buf, sizeof(buf), "%-14s %4d  %9.4f  %8.4f  %9.6f\n", r.name.c_str(),
                      r.count, r.mean_buan, r.std_buan, r.mean_mse);
        os << buf;
    }
    return os.str();
}

void write_csv(const ReconReport& report, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("metrics: cannot write " + path);
    f << "class,mean_buan,std_buan,mean_mse\n";
    char buf[160];
    for (const ReconRow& r : report.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n", r.name.c_str(), r.mean_buan,
                      r.std_buan, r.mean_mse);
        f << buf;
    }
}

} // namespace bundlecodec::metrics
