#include "bundlecodec/klcheck.hpp"

#include "bundlecodec/rng.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace bundlecodec::kl {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

void check_params(const KlParams& p) {
    if (!(p.sigma > 0.0) || !(p.beta > 0.0))
        throw std::invalid_argument("klcheck: sigma and beta must be positive (sigma=" +
                                    std::to_string(p.sigma) + ", beta=" +
                                    std::to_string(p.beta) + ")");
}

double log_p(const KlParams& p, double x) {
    return -0.5 * std::log(kTwoPi * p.sigma * p.sigma) - x * x / (2.0 * p.sigma * p.sigma);
}

double log_q(const KlParams& p, double x) {
    return -std::log(p.beta) - x / p.beta - std::exp(-x / p.beta);
}

double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double eps) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    return adaptive_simpson(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), eps, 60);
}

} // namespace

double kl_closed_form(const KlParams& p) {
    check_params(p);
    return -0.5 * std::log(kTwoPi * p.sigma * p.sigma) + std::log(p.beta) - 0.5 +
           std::exp(p.sigma * p.sigma / (2.0 * p.beta * p.beta));
}

double kl_quadrature(const KlParams& p) {
    check_params(p);
    auto integrand = [&p](double x) {
        return std::exp(log_p(p, x)) * (log_p(p, x) - log_q(p, x));
    };
    return integrate(integrand, -12.0 * p.sigma, 12.0 * p.sigma, 1e-10);
}

McResult kl_monte_carlo(const KlParams& p, std::int64_t n, std::uint64_t seed) {
    check_params(p);
    if (n < 1000) throw std::invalid_argument("klcheck: Monte Carlo needs n >= 1000");
    diff::Rng rng(seed);
    double sum = 0.0, sumsq = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double x = p.sigma * rng.normal();
        const double v = log_p(p, x) - log_q(p, x);
        sum += v;
        sumsq += v * v;
    }
    McResult r;
    r.value = sum / static_cast<double>(n);
    const double var = sumsq / static_cast<double>(n) - r.value * r.value;
    r.std_error = std::sqrt(std::max(0.0, var) / static_cast<double>(n));
    return r;
}

double kl_numeric(const KlParams& p, Method method, std::int64_t n, std::uint64_t seed) {
    if (method == Method::Quadrature) return kl_quadrature(p);
    return kl_monte_carlo(p, n, seed).value;
}

double gumbel_moment_quadrature(const KlParams& p) {
    check_params(p);
    auto integrand = [&p](double x) { return std::exp(log_p(p, x)) * std::exp(-x / p.beta); };
    return integrate(integrand, -12.0 * p.sigma, 12.0 * p.sigma, 1e-10);
}

} // namespace bundlecodec::kl
