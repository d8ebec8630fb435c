#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gebd {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Storage and gradient of one tensor. Reshaped views share `data`.
struct TensorImpl {
    Shape shape;
    std::shared_ptr<std::vector<float>> data;
    std::vector<float> grad;   // empty until a gradient is accumulated
    bool requires_grad = false;

    std::span<float> grad_buffer();  // allocates zeros on first use
};

/// Dense row-major float32 tensor handle. Copies share the underlying impl.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    /// Size of dimension `axis`; negative values count from the back.
    std::size_t dim(int axis) const;
    std::size_t numel() const;

    std::span<const float> data() const;
    /// Mutable access for parameter updates and test perturbations.
    std::span<float> mutable_data();
    std::vector<float> to_vector() const;
    float item() const;
    float at(std::initializer_list<std::size_t> index) const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool on);
    bool has_grad() const;
    std::span<const float> grad() const;
    std::span<float> mutable_grad();
    void zero_grad();

    /// Deep copy detached from the tape.
    Tensor clone() const;
    /// True when both handles refer to the same storage buffer.
    bool shares_storage(const Tensor& other) const;

    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<TensorImpl> impl_;
};

/// Backward closure: receives the output impl (whose grad is populated) and
/// accumulates into the grads of whichever inputs require them.
using BackwardFn = std::function<void(const TensorImpl& out)>;

struct TapeEntry {
    std::string op;
    std::shared_ptr<TensorImpl> output;
    BackwardFn backward;
};

/// Ordered record of differentiable operations executed on this thread.
class GradTape {
public:
    static GradTape& current();

    void push(TapeEntry entry) { entries_.push_back(std::move(entry)); }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<TapeEntry>& entries() const { return entries_; }
    void clear() { entries_.clear(); }

private:
    std::vector<TapeEntry> entries_;
};

bool grad_enabled();

/// Disables tape recording on this thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Builds an op result and, when any input requires grad, records it on the
/// thread's tape. This is the extension point for ops defined outside ops.cpp.
Tensor record_op(const char* name, Shape shape, std::vector<float> values,
                 std::initializer_list<const Tensor*> inputs, BackwardFn backward);
Tensor record_op(const char* name, Shape shape, std::vector<float> values,
                 const std::vector<Tensor>& inputs, BackwardFn backward);

/// Replays the tape in reverse from a scalar loss, then clears it.
void backward(const Tensor& loss);

} // namespace gebd
