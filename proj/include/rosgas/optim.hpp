#pragma once

#include <cmath>
#include <vector>

#include "rosgas/tensor.hpp"

namespace rosgas {

/// Trainable tensor with its gradient accumulator and Adam moment state.
struct Param {
    Tensor value;
    Tensor grad;
    Tensor m;  // first moment
    Tensor v;  // second moment
    long step = 0;

    Param() = default;
    explicit Param(Tensor init)
        : value(std::move(init)),
          grad(value.rows, value.cols),
          m(value.rows, value.cols),
          v(value.rows, value.cols) {}

    void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0); }
};

/// Standard Adam with bias correction. Gradients are zeroed after the update.
inline void adam_step(const std::vector<Param*>& params, double lr, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
    for (Param* p : params) {
        ++p->step;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(p->step));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(p->step));
        for (size_t i = 0; i < p->value.size(); ++i) {
            const double g = p->grad.v[i];
            p->m.v[i] = beta1 * p->m.v[i] + (1.0 - beta1) * g;
            p->v.v[i] = beta2 * p->v.v[i] + (1.0 - beta2) * g * g;
            const double mhat = p->m.v[i] / bc1;
            const double vhat = p->v.v[i] / bc2;
            p->value.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
        p->zero_grad();
    }
}

}  // namespace rosgas
