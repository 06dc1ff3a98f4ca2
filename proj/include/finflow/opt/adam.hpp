#pragma once

#include "finflow/core/tensor.hpp"

#include <cmath>
#include <vector>

namespace finflow::opt {

// adaptive-moment gradient descent, deterministic
class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

    void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
        check(params.size() == grads.size(), "Adam::step: param/grad count mismatch");
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.push_back(Tensor::zeros(p.shape()));
                v_.push_back(Tensor::zeros(p.shape()));
            }
        }
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, t_);
        const double c2 = 1.0 - std::pow(b2_, t_);
        for (std::size_t k = 0; k < params.size(); ++k) {
            double* p = params[k].raw();
            double* m = m_[k].raw();
            double* v = v_[k].raw();
            const double* g = grads[k].data();
            for (std::size_t i = 0; i < params[k].size(); ++i) {
                m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
                v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
                p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
            }
        }
    }

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

private:
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

} // namespace finflow::opt
