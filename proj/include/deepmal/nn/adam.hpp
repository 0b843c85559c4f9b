#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deepmal/nn/layers.hpp"

DEEPMAL_NN_BEGIN

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double decay = 0.95;  // per-epoch learning-rate multiplier
};

/// Adam with bias correction and per-epoch exponential learning-rate decay.
class Adam {
public:
    explicit Adam(AdamConfig config = {});

    /// Learning rate for epoch `epoch` (0-based): lr0 * decay^epoch.
    double learning_rate_at(std::size_t epoch) const;
    void start_epoch(std::size_t epoch) { lr_ = learning_rate_at(epoch); }

    /// Applies one update. Moments are allocated on first use and matched to
    /// parameters by position. Throws TrainingError on a non-finite gradient.
    void step(std::span<const Param> params);

    std::uint64_t steps() const { return t_; }
    double learning_rate() const { return lr_; }
    const AdamConfig& config() const { return config_; }

private:
    AdamConfig config_;
    double lr_;
    std::uint64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

DEEPMAL_NN_END
