#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "norminorm/errors.hpp"
#include "norminorm/matrix.hpp"
#include "norminorm/rng.hpp"

namespace norminorm {

enum class ModelKind { linear, mlp1 };

/// Tiny differentiable regressors with a flat parameter vector.
///   linear: y = x.w + w0                      (d + 1 parameters)
///   mlp1:   y = tanh(x.W1 + b1).w2 + b2       (d*h + h + h + 1 parameters)
/// mlp1 layout: [W1 row-major (feature-major, d*h), b1 (h), w2 (h), b2].
struct ToyModel {
    ModelKind kind = ModelKind::linear;
    std::size_t dim = 0;
    std::size_t hidden = 0;
    std::vector<double> params;
};

inline std::size_t param_count(ModelKind kind, std::size_t dim, std::size_t hidden) {
    return kind == ModelKind::linear ? dim + 1 : dim * hidden + 2 * hidden + 1;
}

inline ToyModel make_linear(std::size_t dim) {
    if (dim == 0) throw InvalidSpec("linear model needs dim >= 1");
    ToyModel m;
    m.kind = ModelKind::linear;
    m.dim = dim;
    m.params.assign(param_count(m.kind, dim, 0), 0.0);
    return m;
}

inline ToyModel make_mlp1(std::size_t dim, std::size_t hidden) {
    if (dim == 0 || hidden == 0) throw InvalidSpec("mlp1 model needs dim >= 1 and hidden >= 1");
    ToyModel m;
    m.kind = ModelKind::mlp1;
    m.dim = dim;
    m.hidden = hidden;
    m.params.assign(param_count(m.kind, dim, hidden), 0.0);
    return m;
}

/// Per-layer uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
inline void init_params(ToyModel& model, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    const auto draw = [&](double fan_in) {
        const double limit = 1.0 / std::sqrt(fan_in);
        return uniform(gen, -limit, limit);
    };
    if (model.kind == ModelKind::linear) {
        for (double& p : model.params) p = draw(static_cast<double>(model.dim));
        return;
    }
    const std::size_t d = model.dim, h = model.hidden;
    std::size_t i = 0;
    for (; i < d * h + h; ++i) model.params[i] = draw(static_cast<double>(d));   // W1, b1
    for (; i < model.params.size(); ++i) model.params[i] = draw(static_cast<double>(h));  // w2, b2
}

namespace detail {

inline void require_model_features(const ToyModel& model, const RowMatrix& features) {
    if (features.cols() != model.dim) {
        throw DimensionMismatch("feature width " + std::to_string(features.cols()) +
                                " does not match model dim " + std::to_string(model.dim));
    }
    if (model.params.size() != param_count(model.kind, model.dim, model.hidden)) {
        throw DimensionMismatch("parameter vector length does not match model shape");
    }
}

}  // namespace detail

inline std::vector<double> model_forward(const ToyModel& model, const RowMatrix& features) {
    detail::require_model_features(model, features);
    const std::size_t n = features.rows();
    const std::size_t d = model.dim;
    std::vector<double> out(n, 0.0);
    if (model.kind == ModelKind::linear) {
        const double w0 = model.params[d];
        for (std::size_t r = 0; r < n; ++r) {
            double s = w0;
            for (std::size_t i = 0; i < d; ++i) s += features(r, i) * model.params[i];
            out[r] = s;
        }
        return out;
    }
    const std::size_t h = model.hidden;
    const double* w1 = model.params.data();
    const double* b1 = w1 + d * h;
    const double* w2 = b1 + h;
    const double b2 = model.params[d * h + 2 * h];
    for (std::size_t r = 0; r < n; ++r) {
        double s = b2;
        for (std::size_t k = 0; k < h; ++k) {
            double z = b1[k];
            for (std::size_t i = 0; i < d; ++i) z += features(r, i) * w1[i * h + k];
            s += std::tanh(z) * w2[k];
        }
        out[r] = s;
    }
    return out;
}

/// Gradient of the composed objective with respect to the parameters, given
/// the upstream gradient with respect to the predictions.
inline std::vector<double> model_backward(const ToyModel& model, const RowMatrix& features,
                                          std::span<const double> dl_dpred) {
    detail::require_model_features(model, features);
    if (dl_dpred.size() != features.rows()) {
        throw DimensionMismatch("dl_dpred length does not match feature row count");
    }
    const std::size_t n = features.rows();
    const std::size_t d = model.dim;
    std::vector<double> grad(model.params.size(), 0.0);
    if (model.kind == ModelKind::linear) {
        for (std::size_t r = 0; r < n; ++r) {
            const double g = dl_dpred[r];
            for (std::size_t i = 0; i < d; ++i) grad[i] += features(r, i) * g;
            grad[d] += g;
        }
        return grad;
    }
    const std::size_t h = model.hidden;
    const double* w1 = model.params.data();
    const double* b1 = w1 + d * h;
    const double* w2 = b1 + h;
    double* gw1 = grad.data();
    double* gb1 = gw1 + d * h;
    double* gw2 = gb1 + h;
    double& gb2 = grad[d * h + 2 * h];
    std::vector<double> act(h);
    for (std::size_t r = 0; r < n; ++r) {
        const double g = dl_dpred[r];
        for (std::size_t k = 0; k < h; ++k) {
            double z = b1[k];
            for (std::size_t i = 0; i < d; ++i) z += features(r, i) * w1[i * h + k];
            act[k] = std::tanh(z);
        }
        gb2 += g;
        for (std::size_t k = 0; k < h; ++k) {
            gw2[k] += g * act[k];
            const double gz = g * w2[k] * (1.0 - act[k] * act[k]);
            gb1[k] += gz;
            for (std::size_t i = 0; i < d; ++i) gw1[i * h + k] += features(r, i) * gz;
        }
    }
    return grad;
}

}  // namespace norminorm
