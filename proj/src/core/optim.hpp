#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace pgs {

// Adam with bias correction. Moment state is kept in double regardless of
// the parameter type so long runs stay reproducible across step counts.
template <typename T>
class AdamT {
public:
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void step(const std::vector<ParameterT<T>*>& params, double lr) {
        if (m_.empty()) {
            m_.resize(params.size());
            v_.resize(params.size());
            for (std::size_t i = 0; i < params.size(); ++i) {
                m_[i].assign(static_cast<std::size_t>(params[i]->numel()), 0.0);
                v_[i].assign(static_cast<std::size_t>(params[i]->numel()), 0.0);
            }
        }
        require(m_.size() == params.size(), "adam: parameter list changed size mid-run");
        ++t_;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            ParameterT<T>& p = *params[i];
            require(m_[i].size() == p.grad().size(), "adam: parameter " + p.name() + " resized");
            auto& vals = *p.value.data;
            for (std::size_t j = 0; j < vals.size(); ++j) {
                const double g = p.grad()[j];
                if (!std::isfinite(g))
                    throw NumericError("non-finite gradient in parameter " + p.name());
                m_[i][j] = beta1 * m_[i][j] + (1.0 - beta1) * g;
                v_[i][j] = beta2 * v_[i][j] + (1.0 - beta2) * g * g;
                const double mhat = m_[i][j] / c1;
                const double vhat = v_[i][j] / c2;
                vals[j] = static_cast<T>(vals[j] - lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }

    std::int64_t steps() const { return t_; }
    std::vector<std::vector<double>>& moment1() { return m_; }
    std::vector<std::vector<double>>& moment2() { return v_; }
    void restore(std::int64_t t, std::vector<std::vector<double>> m,
                 std::vector<std::vector<double>> v) {
        t_ = t;
        m_ = std::move(m);
        v_ = std::move(v);
    }

private:
    std::int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

using Adam = AdamT<float>;

}  // namespace pgs
