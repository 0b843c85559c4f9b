#include "deepmal/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "deepmal/util/error.hpp"

DEEPMAL_NN_BEGIN

std::string to_string(LossKind kind) {
    return kind == LossKind::BinaryCrossEntropy ? "binary_crossentropy" : "categorical_crossentropy";
}

LossKind loss_kind_from_string(const std::string& name) {
    if (name == "binary_crossentropy") return LossKind::BinaryCrossEntropy;
    if (name == "categorical_crossentropy") return LossKind::CategoricalCrossEntropy;
    throw ConfigError("unknown loss '" + name + "'");
}

LossResult binary_cross_entropy(const Tensor& probs, std::span<const std::uint8_t> labels) {
    const std::size_t B = probs.rank() ? probs.dim(0) : 0;
    if (probs.size() != B || labels.size() != B) {
        throw ShapeError("binary cross-entropy expects (B, 1) probabilities and B labels");
    }
    LossResult r{0.0, Tensor(probs.shape())};
    if (B == 0) return r;
    const double eps = kProbabilityClamp;
    for (std::size_t i = 0; i < B; ++i) {
        const double raw = probs[i];
        const double p = std::clamp(raw, eps, 1.0 - eps);
        const double y = labels[i] ? 1.0 : 0.0;
        r.value -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        const bool clamped = raw < eps || raw > 1.0 - eps;
        r.grad[i] = clamped ? Real(0)
                            : static_cast<Real>(-(y / p - (1.0 - y) / (1.0 - p)) /
                                                static_cast<double>(B));
    }
    r.value /= static_cast<double>(B);
    return r;
}

LossResult categorical_cross_entropy(const Tensor& probs, std::span<const std::uint8_t> labels) {
    if (probs.rank() != 2 || probs.dim(0) != labels.size()) {
        throw ShapeError("categorical cross-entropy expects (B, K) probabilities and B labels");
    }
    const std::size_t B = probs.dim(0), K = probs.dim(1);
    LossResult r{0.0, Tensor(probs.shape())};
    if (B == 0) return r;
    const double eps = kProbabilityClamp;
    for (std::size_t i = 0; i < B; ++i) {
        if (labels[i] >= K) throw ShapeError("class label outside the output width");
        const std::size_t k = labels[i];
        const double raw = probs.at(i, k);
        const double p = std::clamp(raw, eps, 1.0 - eps);
        r.value -= std::log(p);
        const bool clamped = raw < eps || raw > 1.0 - eps;
        r.grad.at(i, k) = clamped ? Real(0) : static_cast<Real>(-1.0 / (p * static_cast<double>(B)));
    }
    r.value /= static_cast<double>(B);
    return r;
}

LossResult compute_loss(LossKind kind, const Tensor& probs, std::span<const std::uint8_t> labels) {
    return kind == LossKind::BinaryCrossEntropy ? binary_cross_entropy(probs, labels)
                                                : categorical_cross_entropy(probs, labels);
}

DEEPMAL_NN_END
