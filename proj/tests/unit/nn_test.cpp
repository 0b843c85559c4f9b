#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "deepmal/nn/adam.hpp"
#include "deepmal/nn/checkpoint.hpp"
#include "deepmal/nn/layers.hpp"
#include "deepmal/nn/loss.hpp"
#include "deepmal/nn/network.hpp"
#include "deepmal/nn/trainer.hpp"
#include "deepmal/util/error.hpp"
#include "support/gradcheck.hpp"

using namespace deepmal;
using namespace deepmal::nn;
using deepmal::testing::random_tensor;

namespace {

// Reference convolution with "same" padding: (K-1)/2 leading zeros.
Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b) {
    const std::size_t B = x.dim(0), L = x.dim(1), C = x.dim(2);
    const std::size_t K = w.dim(0), F = w.dim(2);
    const std::ptrdiff_t lead = static_cast<std::ptrdiff_t>((K - 1) / 2);
    Tensor y({B, L, F});
    for (std::size_t n = 0; n < B; ++n) {
        for (std::size_t t = 0; t < L; ++t) {
            for (std::size_t f = 0; f < F; ++f) {
                double s = b[f];
                for (std::size_t k = 0; k < K; ++k) {
                    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - lead;
                    if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
                    for (std::size_t c = 0; c < C; ++c) {
                        s += static_cast<double>(x.at(n, static_cast<std::size_t>(src), c)) *
                             w[(k * C + c) * F + f];
                    }
                }
                y.at(n, t, f) = static_cast<Real>(s);
            }
        }
    }
    return y;
}

Tensor naive_dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor y({x.dim(0), w.dim(1)});
    for (std::size_t n = 0; n < x.dim(0); ++n) {
        for (std::size_t u = 0; u < w.dim(1); ++u) {
            double s = b[u];
            for (std::size_t d = 0; d < x.dim(1); ++d) s += static_cast<double>(x.at(n, d)) * w.at(d, u);
            y.at(n, u) = static_cast<Real>(s);
        }
    }
    return y;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    EXPECT_EQ(a.shape(), b.shape());
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    return m;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(Conv1D, IdentityKernelCopiesInput) {
    Rng rng(3);
    const Tensor x = random_tensor({2, 9, 1}, rng);
    const Tensor w({3, 1, 1}, std::vector<Real>{0, 1, 0});
    const Tensor y = conv1d_forward(x, w, Tensor({1}));
    EXPECT_EQ(y, x);
}

TEST(Conv1D, OnesKernelSumsWindowWithZeroPadding) {
    const Tensor x({1, 8, 1}, Real(1));
    const Tensor w({5, 1, 1}, Real(1));
    const Tensor y = conv1d_forward(x, w, Tensor({1}));
    const std::vector<Real> expected{3, 4, 5, 5, 5, 5, 4, 3};
    for (std::size_t t = 0; t < 8; ++t) EXPECT_FLOAT_EQ(y[t], expected[t]) << t;
}

TEST(Conv1D, MatchesNaiveLoopsOnRandomShapes) {
    Rng rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t B = 1 + rng.below(3), L = 1 + rng.below(20), C = 1 + rng.below(4);
        const std::size_t K = 1 + rng.below(6), F = 1 + rng.below(5);
        const Tensor x = random_tensor({B, L, C}, rng);
        const Tensor w = random_tensor({K, C, F}, rng);
        const Tensor b = random_tensor({F}, rng);
        EXPECT_LT(max_abs_diff(conv1d_forward(x, w, b), naive_conv(x, w, b)), 1e-6) << "trial " << trial;
    }
}

TEST(Conv1D, ZeroUpstreamGradientGivesZeroGradients) {
    Rng rng(5);
    const Tensor x = random_tensor({2, 6, 3}, rng);
    const Tensor w = random_tensor({5, 3, 4}, rng);
    const auto g = conv1d_backward(Tensor({2, 6, 4}), x, w);
    for (const Tensor* t : {&g.input, &g.weights, &g.bias}) {
        for (Real v : t->values()) EXPECT_EQ(v, 0);
    }
}

TEST(Dense, MatchesNaiveLoops) {
    Rng rng(12);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t B = 1 + rng.below(5), D = 1 + rng.below(30), U = 1 + rng.below(10);
        const Tensor x = random_tensor({B, D}, rng);
        const Tensor w = random_tensor({D, U}, rng);
        const Tensor b = random_tensor({U}, rng);
        EXPECT_LT(max_abs_diff(dense_forward(x, w, b), naive_dense(x, w, b)), 1e-6);
    }
}

TEST(Dense, ScalarChainRule) {
    const Tensor x({1, 1}, std::vector<Real>{Real(1.5)});
    const Tensor w({1, 1}, std::vector<Real>{Real(-0.7)});
    const Tensor g({1, 1}, std::vector<Real>{Real(2.0)});
    const auto grads = dense_backward(g, x, w);
    EXPECT_FLOAT_EQ(grads.weights[0], 3.0f);
    EXPECT_FLOAT_EQ(grads.bias[0], 2.0f);
    EXPECT_FLOAT_EQ(grads.input[0], -1.4f);
}

TEST(MaxPool1D, TakesWindowMaxima) {
    const Tensor x({1, 4, 1}, std::vector<Real>{1, 3, 2, 8});
    const auto r = maxpool1d_forward(x, 2);
    ASSERT_EQ(r.output.shape(), (Shape{1, 2, 1}));
    EXPECT_EQ(r.output[0], 3);
    EXPECT_EQ(r.output[1], 8);
}

TEST(MaxPool1D, TiesRouteGradientToFirstIndex) {
    const Tensor x({1, 6, 1}, Real(2));
    const auto r = maxpool1d_forward(x, 3);
    for (Real v : r.output.values()) EXPECT_EQ(v, 2);
    const Tensor dx = maxpool1d_backward(Tensor({1, 2, 1}, Real(1)), x.shape(), r.argmax);
    const std::vector<Real> expected{1, 0, 0, 1, 0, 0};
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(dx[i], expected[i]) << i;
}

TEST(MaxPool1D, PartialTrailingWindow) {
    const Tensor x({1, 5, 1}, std::vector<Real>{1, 2, 3, 4, 9});
    const auto r = maxpool1d_forward(x, 2);
    ASSERT_EQ(r.output.shape(), (Shape{1, 3, 1}));
    EXPECT_EQ(r.output[2], 9);
}

TEST(LSTM, ZeroParametersKeepHiddenStateAtZero) {
    LSTM lstm(LayerSpec::lstm(3, true), 2, 1);
    lstm.kernel().fill(0);
    lstm.recurrent_kernel().fill(0);
    lstm.bias().fill(0);
    Rng rng(2);
    const Tensor y = lstm.forward(random_tensor({2, 4, 2}, rng), Mode::Infer);
    ASSERT_EQ(y.shape(), (Shape{2, 4, 3}));
    for (Real v : y.values()) EXPECT_EQ(v, 0);
}

TEST(LSTM, SingleStepMatchesHandComputation) {
    // Two units, one input feature, gate blocks [i, f, g, o].
    LSTM lstm(LayerSpec::lstm(2, false), 1, 1);
    const std::vector<double> w{0.5, -0.3, 0.8, 0.1, -0.6, 0.4, 0.9, -0.2};
    const std::vector<double> b{0.1, 0.0, 1.0, 1.0, -0.1, 0.2, 0.0, 0.3};
    for (std::size_t j = 0; j < 8; ++j) {
        lstm.kernel()[j] = static_cast<Real>(w[j]);
        lstm.bias()[j] = static_cast<Real>(b[j]);
    }
    lstm.recurrent_kernel().fill(Real(0.25));  // no effect on the first step
    const double x = 0.7;
    const Tensor y = lstm.forward(Tensor({1, 1, 1}, std::vector<Real>{static_cast<Real>(x)}), Mode::Infer);
    ASSERT_EQ(y.shape(), (Shape{1, 2}));
    for (std::size_t u = 0; u < 2; ++u) {
        const double i = sigmoid(w[u] * x + b[u]);
        const double g = std::tanh(w[4 + u] * x + b[4 + u]);
        const double o = sigmoid(w[6 + u] * x + b[6 + u]);
        const double c = i * g;  // previous cell is zero
        EXPECT_NEAR(y[u], o * std::tanh(c), 1e-6) << "unit " << u;
    }
}

TEST(LSTM, SecondStepUsesRecurrentKernel) {
    LSTM lstm(LayerSpec::lstm(1, true), 1, 1);
    lstm.kernel().fill(Real(0.5));
    lstm.recurrent_kernel().fill(Real(-0.4));
    lstm.bias().fill(0);
    const Tensor y = lstm.forward(Tensor({1, 2, 1}, std::vector<Real>{1, 1}), Mode::Infer);
    const double a1 = 0.5;
    const double c1 = sigmoid(a1) * std::tanh(a1);
    const double h1 = sigmoid(a1) * std::tanh(c1);
    const double a2 = 0.5 - 0.4 * h1;
    const double c2 = sigmoid(a2) * c1 + sigmoid(a2) * std::tanh(a2);
    EXPECT_NEAR(y[0], h1, 1e-6);
    EXPECT_NEAR(y[1], sigmoid(a2) * std::tanh(c2), 1e-6);
}

TEST(BatchNorm, TrainModeStandardizesEachFeature) {
    BatchNorm bn(LayerSpec::batchnorm(), 3);
    Rng rng(4);
    Tensor x = random_tensor({64, 3}, rng, -100, 100);
    const Tensor y = bn.forward(x, Mode::Train);
    for (std::size_t d = 0; d < 3; ++d) {
        double mean = 0, var = 0;
        for (std::size_t n = 0; n < 64; ++n) mean += y.at(n, d);
        mean /= 64;
        for (std::size_t n = 0; n < 64; ++n) var += (y.at(n, d) - mean) * (y.at(n, d) - mean);
        var /= 64;
        EXPECT_NEAR(mean, 0.0, 1e-5);
        EXPECT_NEAR(var, 1.0, 1e-5);
    }
}

TEST(BatchNorm, InferModeWithUnitStatisticsIsIdentity) {
    BatchNorm bn(LayerSpec::spatial_batchnorm(), 2);
    bn.running_mean().fill(0);
    bn.running_var().fill(1);
    LayerSpec spec = LayerSpec::spatial_batchnorm();
    Rng rng(6);
    const Tensor x = random_tensor({3, 5, 2}, rng);
    const Tensor y = bn.forward(x, Mode::Infer);
    // epsilon keeps the scale a hair below one
    const double scale = 1.0 / std::sqrt(1.0 + spec.epsilon);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i] * scale, 1e-6);
}

TEST(BatchNorm, RunningStatisticsTrackBatches) {
    BatchNorm bn(LayerSpec::batchnorm(), 1);
    const Tensor x({4, 1}, std::vector<Real>{1, 2, 3, 4});
    for (int i = 0; i < 200; ++i) bn.forward(x, Mode::Train);
    EXPECT_NEAR(bn.running_mean()[0], 2.5, 1e-4);
    EXPECT_NEAR(bn.running_var()[0], 5.0 / 3.0, 1e-3);  // unbiased batch variance
}

TEST(Dropout, InferModeIsIdentity) {
    Dropout d(LayerSpec::dropout(0.5), 1);
    Rng rng(1);
    const Tensor x = random_tensor({4, 10}, rng);
    EXPECT_EQ(d.forward(x, Mode::Infer), x);
}

TEST(Dropout, PreservesExpectationAndDropRate) {
    Dropout d(LayerSpec::dropout(0.25), 9);
    const Tensor x({200000}, Real(1));
    const Tensor y = d.forward(x.reshaped({1000, 200}), Mode::Train);
    std::size_t zeros = 0;
    double sum = 0;
    for (Real v : y.values()) {
        zeros += v == 0;
        sum += v;
    }
    EXPECT_NEAR(static_cast<double>(zeros) / y.size(), 0.25, 0.005);
    EXPECT_NEAR(sum / y.size(), 1.0, 0.01);
    // backward uses the same mask
    const Tensor g = d.backward(Tensor(y.shape(), Real(1)));
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(g[i], y[i]);
}

TEST(Softmax, RowsSumToOne) {
    Softmax s;
    Rng rng(8);
    const Tensor y = s.forward(random_tensor({10, 4}, rng, -30, 30), Mode::Infer);
    for (std::size_t n = 0; n < 10; ++n) {
        double sum = 0;
        for (std::size_t k = 0; k < 4; ++k) {
            EXPECT_GE(y.at(n, k), 0);
            sum += y.at(n, k);
        }
        EXPECT_NEAR(sum, 1.0, 1e-6);
    }
}

TEST(Loss, BinaryCrossEntropyValueAndGradient) {
    const Tensor p({2, 1}, std::vector<Real>{Real(0.8), Real(0.4)});
    const std::vector<std::uint8_t> y{1, 0};
    const auto r = binary_cross_entropy(p, y);
    EXPECT_NEAR(r.value, -(std::log(0.8) + std::log(0.6)) / 2, 1e-6);
    EXPECT_NEAR(r.grad[0], -1.0 / 0.8 / 2, 1e-5);
    EXPECT_NEAR(r.grad[1], 1.0 / 0.6 / 2, 1e-5);
}

TEST(Loss, ClampedProbabilitiesStayFiniteWithZeroGradient) {
    const Tensor p({1, 1}, std::vector<Real>{0});
    const std::vector<std::uint8_t> y{1};
    const auto r = binary_cross_entropy(p, y);
    EXPECT_NEAR(r.value, -std::log(kProbabilityClamp), 1e-3);
    EXPECT_EQ(r.grad[0], 0);
}

TEST(Loss, CategoricalCrossEntropyPicksTrueClass) {
    const Tensor p({2, 3}, std::vector<Real>{Real(0.2), Real(0.5), Real(0.3), Real(0.1), Real(0.1), Real(0.8)});
    const std::vector<std::uint8_t> y{1, 2};
    const auto r = categorical_cross_entropy(p, y);
    EXPECT_NEAR(r.value, -(std::log(0.5) + std::log(0.8)) / 2, 1e-6);
    EXPECT_EQ(r.grad[0], 0);
    EXPECT_NEAR(r.grad[1], -1.0 / 0.5 / 2, 1e-5);
}

TEST(Loss, RejectsLabelsOutOfRange) {
    const Tensor p({1, 2}, std::vector<Real>{Real(0.5), Real(0.5)});
    const std::vector<std::uint8_t> y{2};
    EXPECT_THROW(categorical_cross_entropy(p, y), Error);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    Tensor w({3}, std::vector<Real>{1, -2, 3});
    Tensor g({3});
    const Tensor before = w;
    Adam adam;
    std::vector<Param> params{{"w", &w, &g}};
    for (int i = 0; i < 5; ++i) adam.step(params);
    EXPECT_EQ(w, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    Tensor w({1}, std::vector<Real>{Real(0.5)});
    Tensor g({1}, std::vector<Real>{1});
    Adam adam;
    std::vector<Param> params{{"w", &w, &g}};
    adam.step(params);
    EXPECT_NEAR(w[0], 0.5 - 0.001, 1e-7);
}

TEST(Adam, LearningRateDecaysPerEpoch) {
    Adam adam;
    EXPECT_DOUBLE_EQ(adam.learning_rate_at(0), 1e-3);
    EXPECT_NEAR(adam.learning_rate_at(10), 1e-3 * std::pow(0.95, 10), 1e-15);
}

TEST(Adam, NonFiniteGradientThrows) {
    Tensor w({1});
    Tensor g({1}, std::vector<Real>{std::numeric_limits<Real>::quiet_NaN()});
    Adam adam;
    std::vector<Param> params{{"w", &w, &g}};
    EXPECT_THROW(adam.step(params), TrainingError);
}

namespace {

ModelConfig small_classifier(std::size_t classes) {
    ModelConfig c;
    c.name = "small";
    c.input_shape = {12, 1};
    c.layers = {LayerSpec::conv1d(4, 3), LayerSpec::spatial_batchnorm(), LayerSpec::relu(), LayerSpec::maxpool1d(2),
                LayerSpec::flatten(), LayerSpec::dense(8), LayerSpec::relu()};
    if (classes == 2) {
        c.layers.push_back(LayerSpec::dense(1, Init::GlorotUniform));
        c.layers.push_back(LayerSpec::sigmoid());
        c.loss = LossKind::BinaryCrossEntropy;
    } else {
        c.layers.push_back(LayerSpec::dense(classes, Init::GlorotUniform));
        c.layers.push_back(LayerSpec::softmax());
        c.loss = LossKind::CategoricalCrossEntropy;
    }
    return c;
}

}  // namespace

TEST(Network, ShapeInferenceAndConfigRoundTrip) {
    const auto c = small_classifier(3);
    const auto shapes = c.infer_shapes();
    EXPECT_EQ(shapes.front(), (Shape{12, 4}));
    EXPECT_EQ(shapes.back(), (Shape{3}));
    EXPECT_EQ(c.output_width(), 3u);
    const auto back = model_config_from_json(to_json(c));
    EXPECT_EQ(back.layers, c.layers);
    EXPECT_EQ(back.input_shape, c.input_shape);
    EXPECT_EQ(back.loss, c.loss);
}

TEST(Network, RejectsWrongRowSize) {
    Network net(small_classifier(2), 1);
    EXPECT_THROW(net.forward(Tensor({2, 11}), Mode::Infer), ShapeError);
}

TEST(Network, BinaryLossNeedsOneOutput) {
    auto c = small_classifier(3);
    c.loss = LossKind::BinaryCrossEntropy;
    EXPECT_THROW(Network(c, 1), ConfigError);
}

TEST(Network, SameSeedSameInitialization) {
    Network a(small_classifier(2), 42), b(small_classifier(2), 42), c(small_classifier(2), 43);
    Rng rng(1);
    const Tensor x = random_tensor({5, 12}, rng);
    EXPECT_EQ(a.predict(x), b.predict(x));
    EXPECT_NE(a.predict(x), c.predict(x));
}

TEST(Network, PredictedClassesThresholdAndArgmax) {
    const Tensor one({3, 1}, std::vector<Real>{Real(0.2), Real(0.5), Real(0.9)});
    EXPECT_EQ(predicted_classes(one), (std::vector<std::uint8_t>{0, 1, 1}));
    const Tensor many({2, 3}, std::vector<Real>{Real(0.4), Real(0.4), Real(0.2), Real(0.1), Real(0.3), Real(0.6)});
    EXPECT_EQ(predicted_classes(many), (std::vector<std::uint8_t>{0, 2}));
}

TEST(Network, SummaryListsEveryLayer) {
    Network net(small_classifier(2), 1);
    const auto s = net.summary();
    EXPECT_NE(s.find("Conv1D"), std::string::npos);
    EXPECT_NE(s.find(std::to_string(net.param_count())), std::string::npos);
}

TEST(Trainer, OverfitsOneSmallBatch) {
    Rng rng(17);
    Tensor x = random_tensor({16, 12}, rng);
    std::vector<std::uint8_t> y(16);
    for (std::size_t i = 0; i < 16; ++i) y[i] = static_cast<std::uint8_t>(i % 3);
    Network net(small_classifier(3), 3);
    TrainConfig tc;
    tc.epochs = 300;
    tc.batch_size = 16;
    tc.adam.learning_rate = 0.01;
    tc.adam.decay = 1.0;
    const auto h = train(net, x, y, nullptr, {}, tc);
    EXPECT_LT(h.back().train_loss, 0.05);
    EXPECT_DOUBLE_EQ(evaluate(net, x, y).accuracy, 1.0);
}

TEST(Trainer, SameSeedReproducesHistoryAndWeights) {
    Rng rng(18);
    Tensor x = random_tensor({50, 12}, rng);
    std::vector<std::uint8_t> y(50);
    for (std::size_t i = 0; i < 50; ++i) y[i] = x[i * 12] > 0;
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 7;  // 50 = 7*7 + 1: trailing single row joins the last batch
    auto run = [&] {
        Network net(small_classifier(2), 5);
        auto h = train(net, x, y, &x, y, tc);
        return std::make_pair(h, net.predict(x));
    };
    const auto a = run();
    const auto b = run();
    ASSERT_EQ(a.first.size(), 3u);
    for (std::size_t e = 0; e < 3; ++e) {
        EXPECT_EQ(a.first[e].train_loss, b.first[e].train_loss);
        EXPECT_EQ(a.first[e].val_acc, b.first[e].val_acc);
    }
    EXPECT_EQ(a.second, b.second);
}

TEST(Trainer, NonFiniteInputsRaiseTrainingError) {
    Tensor x({8, 12}, std::numeric_limits<Real>::infinity());
    std::vector<std::uint8_t> y(8, 1);
    Network net(small_classifier(2), 1);
    TrainConfig tc;
    tc.epochs = 1;
    EXPECT_THROW(train(net, x, y, nullptr, {}, tc), TrainingError);
}

TEST(Trainer, RejectsLabelBeyondOutputWidth) {
    Tensor x({4, 12});
    std::vector<std::uint8_t> y{0, 1, 2, 0};
    Network net(small_classifier(2), 1);
    EXPECT_THROW(train(net, x, y, nullptr, {}, TrainConfig{}), Error);
}

TEST(Checkpoint, NetworkRoundTripPredictsIdentically) {
    Rng rng(19);
    Tensor x = random_tensor({20, 12}, rng);
    std::vector<std::uint8_t> y(20);
    for (std::size_t i = 0; i < 20; ++i) y[i] = static_cast<std::uint8_t>(i % 3);
    Network net(small_classifier(3), 7);
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 8;
    train(net, x, y, nullptr, {}, tc);

    Container c;
    store_network(net, c);
    const auto path = std::filesystem::temp_directory_path() / "deepmal_nn_ckpt_test.dmck";
    c.save(path);
    const auto loaded = Container::load(path);
    Network back = restore_network(loaded);
    EXPECT_EQ(back.predict(x), net.predict(x));
    std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsForeignBytes) {
    const auto path = std::filesystem::temp_directory_path() / "deepmal_nn_bad.dmck";
    {
        std::ofstream out(path, std::ios::binary);
        out << "not a checkpoint at all";
    }
    EXPECT_THROW(Container::load(path), FormatError);
    std::filesystem::remove(path);
}

TEST(Checkpoint, HistoryJsonRoundTrip) {
    History h{{1, 0.5, 0.6, 0.7, 0.8}, {2, 0.25, 0.75, 0.4, 0.9}};
    const auto back = history_from_json(to_json(h));
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].epoch, 2u);
    EXPECT_EQ(back[1].val_acc, 0.9);
}
