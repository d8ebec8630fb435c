#include "gebd/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "gebd/error.hpp"

namespace gebd {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::span<float> TensorImpl::grad_buffer() {
    if (grad.empty()) grad.assign(data->size(), 0.0f);
    return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    const auto n = shape_numel(shape);
    return from(std::move(shape), std::vector<float>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw ShapeError("tensor shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::make_shared<std::vector<float>>(std::move(values));
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
    return from({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
    if (!impl_) throw UsageError("use of undefined tensor");
    return impl_->shape;
}

std::size_t Tensor::dim(int axis) const {
    const auto& s = shape();
    const int r = static_cast<int>(s.size());
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
    }
    return s[static_cast<std::size_t>(a)];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const float> Tensor::data() const {
    if (!impl_) throw UsageError("use of undefined tensor");
    return *impl_->data;
}

std::span<float> Tensor::mutable_data() {
    if (!impl_) throw UsageError("use of undefined tensor");
    return *impl_->data;
}

std::vector<float> Tensor::to_vector() const {
    auto d = data();
    return {d.begin(), d.end()};
}

float Tensor::item() const {
    if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape()));
    return data()[0];
}

float Tensor::at(std::initializer_list<std::size_t> index) const {
    const auto& s = shape();
    if (index.size() != s.size()) throw ShapeError("index rank mismatch for shape " + shape_str(s));
    std::size_t flat = 0;
    std::size_t i = 0;
    for (auto v : index) {
        if (v >= s[i]) throw ShapeError("index out of range for shape " + shape_str(s));
        flat = flat * s[i] + v;
        ++i;
    }
    return data()[flat];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
    if (!impl_) throw UsageError("use of undefined tensor");
    impl_->requires_grad = on;
    return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const float> Tensor::grad() const {
    if (!impl_) throw UsageError("use of undefined tensor");
    return impl_->grad;
}

std::span<float> Tensor::mutable_grad() {
    if (!impl_) throw UsageError("use of undefined tensor");
    return impl_->grad_buffer();
}

void Tensor::zero_grad() {
    if (impl_ && !impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

Tensor Tensor::clone() const { return from(shape(), to_vector(), false); }

bool Tensor::shares_storage(const Tensor& other) const {
    return impl_ && other.impl_ && impl_->data == other.impl_->data;
}

GradTape& GradTape::current() {
    thread_local GradTape tape;
    return tape;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace {

template <typename Range>
Tensor record_impl(const char* name, Shape shape, std::vector<float> values, const Range& inputs,
                   BackwardFn backward) {
    Tensor out = Tensor::from(std::move(shape), std::move(values));
    bool needs = false;
    for (const Tensor* t : inputs) needs = needs || t->requires_grad();
    if (needs && g_grad_enabled) {
        out.set_requires_grad(true);
        GradTape::current().push({name, out.impl(), std::move(backward)});
    }
    return out;
}

} // namespace

Tensor record_op(const char* name, Shape shape, std::vector<float> values,
                 std::initializer_list<const Tensor*> inputs, BackwardFn backward) {
    return record_impl(name, std::move(shape), std::move(values), inputs, std::move(backward));
}

Tensor record_op(const char* name, Shape shape, std::vector<float> values,
                 const std::vector<Tensor>& inputs, BackwardFn backward) {
    std::vector<const Tensor*> ptrs;
    ptrs.reserve(inputs.size());
    for (const auto& t : inputs) ptrs.push_back(&t);
    return record_impl(name, std::move(shape), std::move(values), ptrs, std::move(backward));
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw UsageError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
    }
    auto& tape = GradTape::current();
    if (tape.empty()) throw UsageError("backward() called with an empty tape");
    loss.impl()->grad_buffer()[0] += 1.0f;
    const auto& entries = tape.entries();
    for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
        if (it->output->grad.empty()) continue;
        it->backward(*it->output);
    }
    tape.clear();
}

} // namespace gebd
