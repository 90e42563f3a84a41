#pragma once

#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "voxseek/error.hpp"
#include "voxseek/num/rng.hpp"
#include "voxseek/num/tensor.hpp"

namespace voxseek::num {

/// Owns a model's parameters. Uses a deque so references stay stable while
/// parameters are added.
template <class T>
class ParamSetT {
public:
    ParameterT<T>& add(std::string name, std::vector<int> shape) {
        params_.emplace_back(std::move(name), std::move(shape));
        return params_.back();
    }

    std::vector<ParameterT<T>*> all() {
        std::vector<ParameterT<T>*> out;
        out.reserve(params_.size());
        for (auto& p : params_) out.push_back(&p);
        return out;
    }

    std::vector<const ParameterT<T>*> all() const {
        std::vector<const ParameterT<T>*> out;
        out.reserve(params_.size());
        for (auto& p : params_) out.push_back(&p);
        return out;
    }

    ParameterT<T>* find(const std::string& name) {
        for (auto& p : params_)
            if (p.name == name) return &p;
        return nullptr;
    }

    void zero_grad() {
        for (auto& p : params_) p.grad.fill(T{});
    }

    size_t size() const { return params_.size(); }

private:
    std::deque<ParameterT<T>> params_;
};

using ParamSet = ParamSetT<float>;

/// Uniform init in +-sqrt(6/(fan_in+fan_out)).
template <class T>
void init_glorot(ParameterT<T>& p, RngState& rng, int fan_in, int fan_out) {
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (int i = 0; i < p.value.numel(); ++i) p.value[i] = static_cast<T>(rng.uniform(-bound, bound));
}

template <class T>
void init_constant(ParameterT<T>& p, T c) {
    p.value.fill(c);
}

/// One SGD step: p <- p - lr * g, elementwise. A non-finite gradient aborts
/// the step and names the offending parameter.
template <class T>
void sgd_step(const std::vector<ParameterT<T>*>& params, T learning_rate) {
    for (ParameterT<T>* p : params) {
        if (!p->grad.all_finite())
            throw TrainingError("non-finite gradient in parameter '" + p->name + "'");
        for (int i = 0; i < p->value.numel(); ++i) p->value[i] -= learning_rate * p->grad[i];
    }
}

} // namespace voxseek::num
