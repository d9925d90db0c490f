#pragma once

#include <cmath>
#include <cstring>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "common.hpp"

namespace pgs {

// Dense N-D array (N <= 4) with row-major storage. Copies share the
// underlying buffer; every op is functional, so aliasing is safe and a
// buffer's address identifies a value for the lifetime of a tape epoch.
template <typename T>
class TensorT {
public:
    using Buf = std::shared_ptr<std::vector<T>>;

    Shape shape;
    Buf data;
    bool requires_grad = false;
    // Leaf gradient accumulator, set for parameter tensors only.
    std::shared_ptr<std::vector<T>> grad_sink;

    TensorT() = default;

    static TensorT zeros(Shape s) {
        TensorT t;
        t.shape = s;
        t.data = std::make_shared<std::vector<T>>(static_cast<std::size_t>(s.numel()), T(0));
        return t;
    }

    static TensorT full(Shape s, T v) {
        TensorT t = zeros(s);
        std::fill(t.data->begin(), t.data->end(), v);
        return t;
    }

    static TensorT scalar(T v) { return full(Shape{1}, v); }

    static TensorT from(Shape s, std::vector<T> vals) {
        if (static_cast<std::int64_t>(vals.size()) != s.numel())
            throw DimensionError("tensor: value count " + std::to_string(vals.size()) +
                                 " does not match shape " + s.str());
        TensorT t;
        t.shape = s;
        t.data = std::make_shared<std::vector<T>>(std::move(vals));
        return t;
    }

    std::int64_t numel() const { return shape.numel(); }
    T* ptr() { return data->data(); }
    const T* ptr() const { return data->data(); }
    const void* key() const { return data ? static_cast<const void*>(data->data()) : nullptr; }

    T item() const {
        if (numel() != 1) throw DimensionError("item: tensor is not scalar, shape " + shape.str());
        return (*data)[0];
    }

    TensorT clone() const {
        TensorT t;
        t.shape = shape;
        t.data = std::make_shared<std::vector<T>>(*data);
        return t;
    }
};

// Reverse-mode tape: ordered record of executed differentiable ops.
// backward() replays entries in exact reverse execution order exactly once,
// then flushes leaf gradients into their registered sinks and clears.
template <typename T>
class TapeT {
public:
    bool enabled = true;

    static TapeT& instance() {
        thread_local TapeT tape;
        return tape;
    }

    bool tracking(bool any_input_requires_grad) const {
        return enabled && any_input_requires_grad;
    }

    void record(std::function<void()> fn) { entries_.push_back(std::move(fn)); }

    void note_leaf(const TensorT<T>& t) {
        if (t.grad_sink) sinks_[t.key()] = t.grad_sink;
    }

    std::size_t size() const { return entries_.size(); }

    // Gradient buffer for a tensor, zero-initialized on first touch.
    std::vector<T>& grad(const TensorT<T>& t) {
        auto it = grads_.find(t.key());
        if (it == grads_.end())
            it = grads_.emplace(t.key(), std::vector<T>(static_cast<std::size_t>(t.numel()), T(0))).first;
        return it->second;
    }

    const std::vector<T>* find_grad(const TensorT<T>& t) const {
        auto it = grads_.find(t.key());
        return it == grads_.end() ? nullptr : &it->second;
    }

    void backward(const TensorT<T>& loss) {
        if (loss.numel() != 1) throw DimensionError("backward: loss must be scalar");
        if (entries_.empty()) throw ConfigError("backward: tape is empty");
        grads_[loss.key()] = std::vector<T>{T(1)};
        for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
        for (auto& [key, sink] : sinks_) {
            auto g = grads_.find(key);
            if (g == grads_.end()) continue;
            auto& acc = *sink;
            const auto& src = g->second;
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += src[i];
        }
        clear();
    }

    void clear() {
        entries_.clear();
        grads_.clear();
        sinks_.clear();
    }

private:
    std::vector<std::function<void()>> entries_;
    std::unordered_map<const void*, std::vector<T>> grads_;
    std::unordered_map<const void*, std::shared_ptr<std::vector<T>>> sinks_;
};

template <typename T>
void backward(const TensorT<T>& loss) {
    TapeT<T>::instance().backward(loss);
}

// Disables tape recording for the enclosing scope (inference mode).
template <typename T>
class NoGradGuardT {
public:
    NoGradGuardT() : prev_(TapeT<T>::instance().enabled) { TapeT<T>::instance().enabled = false; }
    ~NoGradGuardT() { TapeT<T>::instance().enabled = prev_; }
    NoGradGuardT(const NoGradGuardT&) = delete;
    NoGradGuardT& operator=(const NoGradGuardT&) = delete;

private:
    bool prev_;
};

// Trainable tensor with a persistent same-shape gradient accumulator.
template <typename T>
class ParameterT {
public:
    ParameterT() = default;
    ParameterT(std::string name, TensorT<T> init) : name_(std::move(name)) {
        value = std::move(init);
        grad_ = std::make_shared<std::vector<T>>(static_cast<std::size_t>(value.numel()), T(0));
        value.requires_grad = true;
        value.grad_sink = grad_;
    }

    TensorT<T> value;

    const std::string& name() const { return name_; }
    std::vector<T>& grad() { return *grad_; }
    const std::vector<T>& grad() const { return *grad_; }
    void zero_grad() { std::fill(grad_->begin(), grad_->end(), T(0)); }
    std::int64_t numel() const { return value.numel(); }

private:
    std::string name_;
    std::shared_ptr<std::vector<T>> grad_;
};

template <typename T>
void check_finite(const TensorT<T>& t, const char* op) {
    for (const T& v : *t.data)
        if (!std::isfinite(static_cast<double>(v)))
            throw NumericError(std::string("non-finite value produced by ") + op);
}

using Tensor = TensorT<float>;
using Parameter = ParameterT<float>;
using Tape = TapeT<float>;
using NoGradGuard = NoGradGuardT<float>;

}  // namespace pgs
