#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "deepmal/nn/layer_spec.hpp"
#include "deepmal/nn/tensor.hpp"
#include "deepmal/util/random.hpp"

DEEPMAL_NN_BEGIN

enum class Mode { Train, Infer };

/// A learnable tensor with its gradient buffer.
struct Param {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

/// Non-learned persistent state (batch-norm running statistics).
struct StateTensor {
    std::string name;
    Tensor* value;
};

/// One stage of a sequential network. `forward` caches what `backward`
/// needs; `backward` must follow the matching forward call and overwrites
/// parameter gradients.
///
/// Shapes passed to `output_shape` exclude the batch axis.
class Layer {
public:
    explicit Layer(LayerSpec spec) : spec_(spec) {}
    virtual ~Layer() = default;
    Layer(const Layer&) = delete;
    Layer& operator=(const Layer&) = delete;

    const LayerSpec& spec() const { return spec_; }
    LayerKind kind() const { return spec_.kind; }

    virtual Shape output_shape(const Shape& input) const = 0;
    virtual Tensor forward(const Tensor& input, Mode mode) = 0;
    virtual Tensor backward(const Tensor& grad_output) = 0;
    virtual std::vector<Param> params() { return {}; }
    virtual std::vector<StateTensor> state() { return {}; }

    std::size_t param_count();

protected:
    LayerSpec spec_;
};

// ---------------------------------------------------------------------------
// Functional kernels. Layers call these; tests call them directly.

/// input (B, L, C), weights (K, C, F), bias (F) -> (B, L, F), stride 1,
/// zero "same" padding with (K-1)/2 leading zeros.
Tensor conv1d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct Conv1DGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};
Conv1DGrads conv1d_backward(const Tensor& grad_output, const Tensor& input, const Tensor& weights);

/// input (B, D), weights (D, U), bias (U) -> (B, U).
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct DenseGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};
DenseGrads dense_backward(const Tensor& grad_output, const Tensor& input, const Tensor& weights);

struct PoolResult {
    Tensor output;
    std::vector<std::size_t> argmax;  // flat input index per output element
};
/// input (B, L, C) -> (B, ceil(L/p), C). The trailing partial window pools
/// over what remains; ties resolve to the lowest index.
PoolResult maxpool1d_forward(const Tensor& input, std::size_t pool);
Tensor maxpool1d_backward(const Tensor& grad_output, const Shape& input_shape,
                          const std::vector<std::size_t>& argmax);

// ---------------------------------------------------------------------------

class Conv1D final : public Layer {
public:
    Conv1D(const LayerSpec& spec, std::size_t in_channels, std::uint64_t seed);
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& input, Mode mode) override;
    Tensor backward(const Tensor& grad_output) override;
    std::vector<Param> params() override;

    Tensor& weights() { return w_; }
    Tensor& bias() { return b_; }

private:
    std::size_t in_channels_;
    Tensor w_, b_, dw_, db_;
    Tensor input_;
};

class MaxPool1D final : public Layer {
public:
    explicit MaxPool1D(const LayerSpec& spec) : Layer(spec) {}
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& input, Mode mode) override;
    Tensor backward(const Tensor& grad_output) override;

private:
    Shape input_shape_;
    std::vector<std::size_t> argmax_;
};

/// Long short-term memory over (B, T, F). Gate blocks are laid out
/// [input, forget, candidate, output] along the 4U axis.
class LSTM final : public Layer {
public:
    LSTM(const LayerSpec& spec, std::size_t in_features, std::uint64_t seed);
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& input, Mode mode) override;
    Tensor backward(const Tensor& grad_output) override;
    std::vector<Param> params() override;

    Tensor& kernel() { return w_; }             // (F, 4U)
    Tensor& recurrent_kernel() { return r_; }   // (U, 4U)
    Tensor& bias() { return b_; }               // (4U)

private:
    std::size_t in_features_;
    std::size_t units_;
    Tensor w_, r_, b_, dw_, dr_, db_;
    // Forward cache, time-major.
    std::size_t batch_ = 0, steps_ = 0;
    Tensor x_tm_;      // (T, B, F)
    Tensor gates_;     // (T, B, 4U) post-activation
    Tensor cells_;     // (T, B, U)
    Tensor cell_tanh_; // (T, B, U)
    Tensor hidden_;    // (T, B, U)
};

class Dense final : public Layer {
public:
    Dense(const LayerSpec& spec, std::size_t in_features, std::uint64_t seed);
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& input, Mode mode) override;
    Tensor backward(const Tensor& grad_output) override;
    std::vector<Param> params() override;

    Tensor& weights() { return w_; }
    Tensor& bias() { return b_; }

private:
    std::size_t in_features_;
    Tensor w_, b_, dw_, db_;
    Tensor input_;
};

/// Normalizes the last axis. The plain variant takes (B, D); the spatial
/// variant takes (B, L, C) and pools statistics over batch and length.
class BatchNorm final : public Layer {
public:
    BatchNorm(const LayerSpec& spec, std::size_t features);
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& input, Mode mode) override;
    Tensor backward(const Tensor& grad_output) override;
    std::vector<Param> params() override;
    std::vector<StateTensor> state() override;

    Tensor& gamma() { return gamma_; }
    Tensor& beta() { return beta_; }
    Tensor& running_mean() { return running_mean_; }
    Tensor& running_var() { return running_var_; }

private:
    std::size_t features_;
    Tensor gamma_, beta_, dgamma_, dbeta_;
    Tensor running_mean_, running_var_;
    Tensor xhat_;
    std::vector<Real> inv_std_;
    Mode last_mode_ = Mode::Infer;
};

/// Inverted dropout: survivors scale by 1/(1-rate) in training.
class Dropout final : public Layer {
public:
    Dropout(const LayerSpec& spec, std::uint64_t seed);
    Shape output_shape(const Shape& input) const override { return input; }
    Tensor forward(const Tensor& input, Mode mode) override;
    Tensor backward(const Tensor& grad_output) override;

    void reseed(std::uint64_t seed) { rng_.seed(seed); }

private:
    Rng rng_;
    std::vector<Real> mask_;
    Mode last_mode_ = Mode::Infer;
};

class ReLU final : public Layer {
public:
    ReLU() : Layer(LayerSpec::relu()) {}
    Shape output_shape(const Shape& input) const override { return input; }
    Tensor forward(const Tensor& input, Mode mode) override;
    Tensor backward(const Tensor& grad_output) override;

private:
    Tensor input_;
};

class Sigmoid final : public Layer {
public:
    Sigmoid() : Layer(LayerSpec::sigmoid()) {}
    Shape output_shape(const Shape& input) const override { return input; }
    Tensor forward(const Tensor& input, Mode mode) override;
    Tensor backward(const Tensor& grad_output) override;

private:
    Tensor output_;
};

/// Softmax over the last axis of (B, K).
class Softmax final : public Layer {
public:
    Softmax() : Layer(LayerSpec::softmax()) {}
    Shape output_shape(const Shape& input) const override { return input; }
    Tensor forward(const Tensor& input, Mode mode) override;
    Tensor backward(const Tensor& grad_output) override;

private:
    Tensor output_;
};

class Flatten final : public Layer {
public:
    Flatten() : Layer(LayerSpec::flatten()) {}
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& input, Mode mode) override;
    Tensor backward(const Tensor& grad_output) override;

private:
    Shape input_shape_;
};

/// Per-sample output shape of `spec` applied to `input_shape`, without
/// building the layer. Throws ShapeError when the shapes are incompatible.
Shape infer_output_shape(const LayerSpec& spec, const Shape& input_shape);

/// Builds a layer for a per-sample input shape; `seed` drives initialization
/// and, for dropout, the mask stream.
std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input_shape,
                                  std::uint64_t seed);

DEEPMAL_NN_END
