#include "deepmal/nn/adam.hpp"

#include <cmath>

#include "deepmal/util/error.hpp"

DEEPMAL_NN_BEGIN

Adam::Adam(AdamConfig config) : config_(config), lr_(config.learning_rate) {
    if (!(config.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(config.decay > 0.0 && config.decay <= 1.0)) throw ConfigError("decay must lie in (0,1]");
    if (!(config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 && config.beta2 < 1.0)) {
        throw ConfigError("Adam betas must lie in [0,1)");
    }
}

double Adam::learning_rate_at(std::size_t epoch) const {
    return config_.learning_rate * std::pow(config_.decay, static_cast<double>(epoch));
}

void Adam::step(std::span<const Param> params) {
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.value->shape());
            v_.emplace_back(p.value->shape());
        }
    }
    if (m_.size() != params.size()) throw ShapeError("optimizer state does not match parameter list");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].grad->shape() != m_[i].shape()) {
            throw ShapeError("gradient for '" + params[i].name + "' does not match its moments");
        }
        for (Real g : params[i].grad->values()) {
            if (!std::isfinite(g)) {
                throw TrainingError("non-finite gradient in parameter '" + params[i].name +
                                    "' at step " + std::to_string(t_ + 1));
            }
        }
    }

    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double step = lr_ * std::sqrt(c2) / c1;
    // Epsilon is applied to the bias-corrected second moment.
    const double eps_hat = config_.epsilon * std::sqrt(c2);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Real* w = params[i].value->data();
        const Real* g = params[i].grad->data();
        Real* m = m_[i].data();
        Real* v = v_[i].data();
        for (std::size_t j = 0, n = m_[i].size(); j < n; ++j) {
            m[j] = static_cast<Real>(b1 * m[j] + (1.0 - b1) * g[j]);
            v[j] = static_cast<Real>(b2 * v[j] + (1.0 - b2) * static_cast<double>(g[j]) * g[j]);
            w[j] = static_cast<Real>(w[j] - step * m[j] / (std::sqrt(static_cast<double>(v[j])) + eps_hat));
        }
    }
}

DEEPMAL_NN_END
