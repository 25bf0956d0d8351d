#include "bundlecodec/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bundlecodec::diff {

GradCheckReport grad_check(const ScalarFn& f, std::vector<Tensor> point, double step, double tol,
                           std::size_t max_coords_per_tensor) {
    for (Tensor& p : point) p.set_requires_grad(true);

    Tape tape;
    Tensor y = f(tape, point);
    if (y.size() != 1)
        throw std::invalid_argument("grad_check: function must be scalar-valued, got " +
                                    shape_str(y.shape()));
    tape.backward(y);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(point.size());
    for (Tensor& p : point) analytic.push_back(p.grad());

    auto eval = [&](std::vector<Tensor>& pt) {
        Tape silent(false);
        return f(silent, pt).value();
    };

    GradCheckReport report;
    for (std::size_t pi = 0; pi < point.size(); ++pi) {
        Tensor& p = point[pi];
        const std::size_t n = p.size();
        std::size_t count = n;
        if (max_coords_per_tensor > 0) count = std::min(n, max_coords_per_tensor);
        for (std::size_t c = 0; c < count; ++c) {
            const std::size_t j = (count == n) ? c : c * n / count;
            double* slot = p.data() + j;
            const double orig = *slot;
            *slot = orig + step;
            const double fp = eval(point);
            *slot = orig - step;
            const double fm = eval(point);
            *slot = orig;
            const double numeric = (fp - fm) / (2.0 * step);
            const double a = analytic[pi][j];
            const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            report.max_rel_err = std::max(report.max_rel_err, rel);
            ++report.checked;
        }
    }
    report.pass = report.max_rel_err < tol;
    return report;
}

} // namespace bundlecodec::diff
