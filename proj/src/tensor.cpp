#include "bundlecodec/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace bundlecodec::diff {

namespace {
std::atomic<bool> g_debug_finite{false};
std::atomic<int> g_threads{1};

// Activation buffers are tens of MB and are reallocated every iteration;
// keep them in the allocator instead of handing pages back to the kernel.
struct MallocTuning {
    MallocTuning() {
#ifdef __GLIBC__
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    }
};
const MallocTuning g_malloc_tuning;
} // namespace

void set_debug_finite_checks(bool on) { g_debug_finite = on; }
bool debug_finite_checks() { return g_debug_finite; }

void set_threads(int n) { g_threads = n < 1 ? 1 : n; }
int threads() { return g_threads; }

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

static void check_shape(const Shape& s) {
    for (int d : s)
        if (d <= 0) throw std::invalid_argument("tensor: nonpositive dimension in " + shape_str(s));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    check_shape(shape);
    auto impl = std::make_shared<Impl>();
    impl->data = std::make_shared<std::vector<double>>(shape_numel(shape), 0.0);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& v : *t.impl_->data) v = value;
    return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    check_shape(shape);
    if (shape_numel(shape) != values.size())
        throw std::invalid_argument("tensor: " + shape_str(shape) + " needs " +
                                    std::to_string(shape_numel(shape)) + " values, got " +
                                    std::to_string(values.size()));
    auto impl = std::make_shared<Impl>();
    impl->shape = std::move(shape);
    impl->data = std::make_shared<std::vector<double>>(std::move(values));
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
int Tensor::ndim() const { return static_cast<int>(impl_->shape.size()); }
int Tensor::dim(int i) const { return impl_->shape.at(static_cast<std::size_t>(i)); }
std::size_t Tensor::size() const { return impl_->data->size(); }

double* Tensor::data() { return impl_->data->data(); }
const double* Tensor::data() const { return impl_->data->data(); }
std::vector<double>& Tensor::vec() { return *impl_->data; }
const std::vector<double>& Tensor::vec() const { return *impl_->data; }

double Tensor::value() const {
    if (size() != 1) throw std::logic_error("tensor: value() on non-scalar " + shape_str(shape()));
    return (*impl_->data)[0];
}

double Tensor::at(std::size_t flat) const { return impl_->data->at(flat); }

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
Tensor& Tensor::set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
}

bool Tensor::grad_allocated() const { return impl_->grad != nullptr; }

std::vector<double>& Tensor::grad() {
    if (!impl_->grad) impl_->grad = std::make_shared<std::vector<double>>(size(), 0.0);
    return *impl_->grad;
}

const std::vector<double>& Tensor::grad() const {
    if (!impl_->grad) throw std::logic_error("tensor: gradient not allocated");
    return *impl_->grad;
}

void Tensor::zero_grad() {
    if (impl_->grad)
        for (double& g : *impl_->grad) g = 0.0;
}

Tensor Tensor::detached() const {
    auto impl = std::make_shared<Impl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    impl->requires_grad = false;
    return Tensor(std::move(impl));
}

Tensor Tensor::clone() const {
    auto impl = std::make_shared<Impl>();
    impl->shape = impl_->shape;
    impl->data = std::make_shared<std::vector<double>>(*impl_->data);
    impl->requires_grad = impl_->requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::reshaped(Shape shape) const {
    check_shape(shape);
    if (shape_numel(shape) != size())
        throw std::invalid_argument("tensor: reshape " + shape_str(this->shape()) + " -> " +
                                    shape_str(shape) + " changes element count");
    auto impl = std::make_shared<Impl>();
    impl->shape = std::move(shape);
    impl->data = impl_->data;
    impl->requires_grad = impl_->requires_grad;
    return Tensor(std::move(impl));
}

void Tape::record(const char* name, std::vector<Tensor> inputs, const Tensor& output,
                  std::function<void()> backward) {
    if (!recording_) return;
    if (produced_.count(output.id()))
        throw std::logic_error(std::string("tape: output of '") + name + "' already produced");
    produced_.insert(output.id());
    ops_.push_back(TapeOp{name, std::move(inputs), output, std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw std::invalid_argument("tape: backward needs a scalar loss, got " +
                                    shape_str(loss.shape()));
    if (!produced_.count(loss.id()))
        throw std::invalid_argument("tape: loss was not produced through this tape");

    // Zero-init leaf gradients so non-participating leaves report zeros.
    for (auto& op : ops_)
        for (auto& in : op.inputs)
            if (in.requires_grad() && !produced_.count(in.id())) in.grad();

    Tensor seed = loss;
    seed.grad()[0] += 1.0;

    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
        if (!it->output.grad_allocated()) continue; // dead branch
        it->backward();
    }
}

void Tape::clear() {
    ops_.clear();
    produced_.clear();
}

} // namespace bundlecodec::diff
