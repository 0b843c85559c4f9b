#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "deepmal/nn/layers.hpp"
#include "deepmal/nn/loss.hpp"

DEEPMAL_NN_BEGIN

/// Declarative model: per-sample input shape, the layer stack and its loss.
/// Batches of any shape with a matching per-row element count are reshaped
/// to (batch, input_shape...) on entry.
struct ModelConfig {
    std::string name;
    Shape input_shape;
    std::vector<LayerSpec> layers;
    LossKind loss = LossKind::BinaryCrossEntropy;

    /// Number of output columns the stack produces.
    std::size_t output_width() const;
    /// Per-sample shape after every layer, checked end to end.
    std::vector<Shape> infer_shapes() const;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

class Network {
public:
    Network(ModelConfig config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    std::uint64_t seed() const { return seed_; }

    Tensor forward(const Tensor& batch, Mode mode);
    /// Back-propagates d loss / d output; leaves gradients on every Param.
    void backward(const Tensor& grad_output);

    /// Probabilities for every row of `inputs`, evaluated in inference mode.
    Tensor predict(const Tensor& inputs, std::size_t batch_size = 256);

    std::vector<Param> params();
    std::vector<StateTensor> state();
    std::size_t param_count();

    std::size_t layer_count() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_.at(i); }

    /// Human-readable table: one row per layer with output shape and
    /// parameter count.
    std::string summary();

private:
    ModelConfig config_;
    std::uint64_t seed_;
    std::vector<std::unique_ptr<Layer>> layers_;
};

/// Predicted class per row: threshold 0.5 for one-column outputs, argmax
/// (lowest index on ties) otherwise.
std::vector<std::uint8_t> predicted_classes(const Tensor& probs, double threshold = 0.5);

DEEPMAL_NN_END
