#pragma once

// Independent brute-force metric oracle: full O(|A||B|P) enumeration, no
// early exits, no distance-matrix reuse. Follows the documented accumulation
// order (pairwise (i, P-1-i) terms) so equality against the optimized
// implementation is exact.

#include "bundlecodec/curves.hpp"

#include <algorithm>
#include <cmath>

namespace bundlecodec::testutil {

inline double naive_mdf(const curves::Streamline& a, const curves::Streamline& b) {
    const int P = a.points();
    auto d3 = [](const curves::Point& u, const curves::Point& v) {
        return std::sqrt((u[0] - v[0]) * (u[0] - v[0]) + (u[1] - v[1]) * (u[1] - v[1]) +
                         (u[2] - v[2]) * (u[2] - v[2]));
    };
    double direct = 0.0, flipped = 0.0;
    for (int i = 0; i < P / 2; ++i) {
        const int j = P - 1 - i;
        direct += d3(a.pts[i], b.pts[i]) + d3(a.pts[j], b.pts[j]);
        flipped += d3(a.pts[i], b.pts[j]) + d3(a.pts[j], b.pts[i]);
    }
    if (P & 1) {
        direct += d3(a.pts[P / 2], b.pts[P / 2]);
        flipped += d3(a.pts[P / 2], b.pts[P / 2]);
    }
    return std::min(direct, flipped) / P;
}

inline double naive_ba(const curves::Bundle& A, const curves::Bundle& B, double theta) {
    int ca = 0, cb = 0;
    for (const auto& a : A.lines) {
        double best = 1e300;
        for (const auto& b : B.lines) best = std::min(best, naive_mdf(a, b));
        if (best <= theta) ++ca;
    }
    for (const auto& b : B.lines) {
        double best = 1e300;
        for (const auto& a : A.lines) best = std::min(best, naive_mdf(a, b));
        if (best <= theta) ++cb;
    }
    return 0.5 * (static_cast<double>(ca) / A.lines.size() +
                  static_cast<double>(cb) / B.lines.size());
}

} // namespace bundlecodec::testutil
