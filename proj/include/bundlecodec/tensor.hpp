#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

namespace bundlecodec::diff {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Debug evaluation mode: every op output is scanned for NaN/Inf and an error
// is raised naming the op. Off by default.
void set_debug_finite_checks(bool on);
bool debug_finite_checks();

// Worker threads for the batched kernels. Reductions are chunked in a fixed
// order, so results are bitwise identical for any thread count. Default 1.
void set_threads(int n);
int threads();

// Dense row-major float64 tensor. Value-semantic handle over shared storage;
// once an op has recorded a tensor it is treated as immutable.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int ndim() const;
    int dim(int i) const;
    std::size_t size() const;

    double* data();
    const double* data() const;
    std::vector<double>& vec();
    const std::vector<double>& vec() const;
    double value() const; // scalar tensors only
    double at(std::size_t flat) const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool v);

    bool grad_allocated() const;
    std::vector<double>& grad();             // allocates zeros on first use
    const std::vector<double>& grad() const; // throws if not allocated
    void zero_grad();

    Tensor detached() const;      // shares data, no gradient flow
    Tensor clone() const;         // deep copy of data
    Tensor reshaped(Shape shape) const; // shares data buffer, own grad

    const void* id() const { return impl_.get(); }

private:
    struct Impl {
        Shape shape;
        std::shared_ptr<std::vector<double>> data;
        std::shared_ptr<std::vector<double>> grad; // lazily allocated
        bool requires_grad = false;
    };
    std::shared_ptr<Impl> impl_;
    explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
};

// One recorded primitive application.
struct TapeOp {
    const char* name;
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void()> backward;
};

// Ordered record of primitive applications. Ops append during the forward
// pass; backward() replays them in exact reverse order. Single-threaded per
// model instance.
class Tape {
public:
    explicit Tape(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }
    void set_recording(bool on) { recording_ = on; }

    void record(const char* name, std::vector<Tensor> inputs, const Tensor& output,
                std::function<void()> backward);

    // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
    // requires_grad leaf reachable from the tape; untouched leaves get zeros.
    void backward(const Tensor& loss);

    std::size_t num_ops() const { return ops_.size(); }
    bool produced(const Tensor& t) const { return produced_.count(t.id()) != 0; }
    void clear();

private:
    bool recording_;
    std::vector<TapeOp> ops_;
    std::unordered_set<const void*> produced_;
};

// True when an op application should be recorded on this tape.
inline bool track(const Tape& tape, const Tensor& a) {
    return tape.recording() && a.requires_grad();
}
inline bool track(const Tape& tape, const Tensor& a, const Tensor& b) {
    return tape.recording() && (a.requires_grad() || b.requires_grad());
}

} // namespace bundlecodec::diff
