#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "deepmal/nn/adam.hpp"
#include "deepmal/nn/network.hpp"

DEEPMAL_NN_BEGIN

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 128;
    std::uint64_t seed = 1;
    AdamConfig adam;
};

/// Per-epoch learning curve row.
struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};
using History = std::vector<EpochStats>;

struct LossAccuracy {
    double loss = 0.0;
    double accuracy = 0.0;
};

LossAccuracy evaluate(Network& net, const Tensor& inputs, std::span<const std::uint8_t> labels,
                      std::size_t batch_size = 256);

/// Mini-batch Adam training. Shuffling uses a stream derived from
/// `config.seed`, so a fixed seed reproduces the run exactly. Train metrics are
/// averaged over the epoch's batches; validation metrics (when a validation
/// set is given) are computed in inference mode after the epoch.
///
/// Throws TrainingError when the loss becomes non-finite.
History train(Network& net, const Tensor& train_x, std::span<const std::uint8_t> train_y,
              const Tensor* val_x, std::span<const std::uint8_t> val_y, const TrainConfig& config,
              const std::function<void(const EpochStats&)>& on_epoch = {});

DEEPMAL_NN_END
