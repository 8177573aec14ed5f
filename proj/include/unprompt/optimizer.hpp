#pragma once

#include <cmath>
#include <vector>

#include "unprompt/types.hpp"

namespace unprompt {

// Adam with bias correction. Each tensor gets a slot index fixed for the
// lifetime of the optimizer.
class Adam {
public:
    explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // Call once per optimization step, before the per-tensor updates.
    void next_step() { ++t_; }

    void update(std::size_t slot, Matrix& param, const Matrix& grad) {
        if (slot >= moments_.size()) moments_.resize(slot + 1);
        auto& [m, v] = moments_[slot];
        if (m.size() == 0) {
            m = Matrix::Zero(param.rows(), param.cols());
            v = Matrix::Zero(param.rows(), param.cols());
        }
        m = beta1_ * m + (1.0 - beta1_) * grad;
        v = beta2_ * v + (1.0 - beta2_) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(beta1_, t_);
        const double c2 = 1.0 - std::pow(beta2_, t_);
        param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    }

    int steps() const { return t_; }

private:
    struct Moments {
        Matrix m;
        Matrix v;
    };
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<Moments> moments_;
};

}  // namespace unprompt
