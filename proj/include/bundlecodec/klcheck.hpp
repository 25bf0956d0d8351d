#pragma once

#include <cstdint>

namespace bundlecodec::kl {

// Gaussian p(x) = exp(-x^2 / 2s^2) / sqrt(2 pi s^2), Gumbel
// q(x) = exp(-x/b - exp(-x/b)) / b.
struct KlParams {
    double sigma = 1.0;
    double beta = 1.0;
};

// KL(p || q) = -1/2 ln(2 pi sigma^2) + ln beta - 1/2 + exp(sigma^2 / (2 beta^2)).
// No data argument: the divergence depends on (sigma, beta) only.
double kl_closed_form(const KlParams& p);

enum class Method { Quadrature, MonteCarlo };

struct McResult {
    double value = 0.0;
    double std_error = 0.0;
};

// Adaptive Simpson of E_p[ln p - ln q] over [-12 sigma, 12 sigma].
double kl_quadrature(const KlParams& p);

// Seeded sample mean of ln p - ln q under p.
McResult kl_monte_carlo(const KlParams& p, std::int64_t n, std::uint64_t seed);

double kl_numeric(const KlParams& p, Method method, std::int64_t n = 1000000,
                  std::uint64_t seed = 0);

// Isolated final step of the derivation: E_p[exp(-x/beta)] by quadrature,
// to compare against exp(sigma^2 / (2 beta^2)).
double gumbel_moment_quadrature(const KlParams& p);

} // namespace bundlecodec::kl
