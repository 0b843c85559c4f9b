#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "deepmal/nn/tensor.hpp"

DEEPMAL_NN_BEGIN

enum class LossKind { BinaryCrossEntropy, CategoricalCrossEntropy };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

inline constexpr double kProbabilityClamp = 1e-7;

struct LossResult {
    double value = 0.0;
    Tensor grad;  // d loss / d probabilities, same shape as the input
};

/// Mean binary cross-entropy of (B, 1) probabilities against 0/1 labels.
/// Probabilities are clamped to [eps, 1-eps]; the gradient is zero where
/// the clamp is active.
LossResult binary_cross_entropy(const Tensor& probs, std::span<const std::uint8_t> labels);

/// Mean categorical cross-entropy of (B, K) probabilities against class
/// indices (an implicit one-hot target).
LossResult categorical_cross_entropy(const Tensor& probs, std::span<const std::uint8_t> labels);

LossResult compute_loss(LossKind kind, const Tensor& probs, std::span<const std::uint8_t> labels);

DEEPMAL_NN_END
