#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "norminorm/errors.hpp"

namespace norminorm {

enum class OptimizerKind { sgd, adam };

/// Plain SGD or Adam with the usual constants (0.9, 0.999, 1e-8) and bias
/// correction. State is per-instance; one instance per training run.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, std::size_t n_params)
        : kind_(kind), m_(n_params, 0.0), v_(n_params, 0.0) {}

    OptimizerKind kind() const noexcept { return kind_; }

    void step(std::vector<double>& params, std::span<const double> grads, double lr) {
        if (params.size() != m_.size() || grads.size() != m_.size()) {
            throw DimensionMismatch("optimizer state, params and grads must have equal length");
        }
        if (kind_ == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
            return;
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grads[i];
            v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grads[i] * grads[i];
            const double m_hat = m_[i] / bc1;
            const double v_hat = v_[i] / bc2;
            params[i] -= lr * m_hat / (std::sqrt(v_hat) + kEps);
        }
    }

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

private:
    OptimizerKind kind_;
    std::vector<double> m_;
    std::vector<double> v_;
    long t_ = 0;
};

}  // namespace norminorm
