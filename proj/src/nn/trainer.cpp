#include "deepmal/nn/trainer.hpp"

#include <cmath>
#include <numeric>

#include "deepmal/util/error.hpp"
#include "deepmal/util/random.hpp"
#include "deepmal/util/seed.hpp"

DEEPMAL_NN_BEGIN
namespace {

std::size_t count_correct(const Tensor& probs, std::span<const std::uint8_t> labels) {
    const auto pred = predicted_classes(probs);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
    return correct;
}

}  // namespace

LossAccuracy evaluate(Network& net, const Tensor& inputs, std::span<const std::uint8_t> labels,
                      std::size_t batch_size) {
    const std::size_t n = labels.size();
    if (n == 0) return {};
    const Tensor probs = net.predict(inputs, batch_size);
    const auto loss = compute_loss(net.config().loss, probs, labels);
    return {loss.value, static_cast<double>(count_correct(probs, labels)) / static_cast<double>(n)};
}

History train(Network& net, const Tensor& train_x, std::span<const std::uint8_t> train_y,
              const Tensor* val_x, std::span<const std::uint8_t> val_y, const TrainConfig& config,
              const std::function<void(const EpochStats&)>& on_epoch) {
    const std::size_t n = train_y.size();
    if (n == 0 || train_x.dim(0) != n) throw DatasetError("training inputs and labels disagree");
    if (config.batch_size == 0) throw ConfigError("batch size must be positive");
    const std::size_t width = net.config().output_width();
    for (auto y : train_y) {
        if ((width == 1 && y > 1) || (width > 1 && y >= width)) {
            throw ConfigError("label " + std::to_string(y) + " does not fit a model with " +
                              std::to_string(width) + " outputs");
        }
    }

    Adam adam(config.adam);
    auto params = net.params();
    History history;
    std::vector<std::size_t> order(n);
    std::vector<std::uint8_t> batch_y;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(config.seed, "shuffle", epoch));
        rng.shuffle(std::span<std::size_t>(order));
        adam.start_epoch(epoch);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n;) {
            std::size_t end = std::min(n, start + config.batch_size);
            // A trailing single sample rides with the previous batch; training
            // batch norm needs two rows.
            if (n - end == 1) end = n;
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            batch_y.clear();
            for (auto i : idx) batch_y.push_back(train_y[i]);

            const Tensor probs = net.forward(train_x.gather_rows(idx), Mode::Train);
            const auto loss = compute_loss(net.config().loss, probs, batch_y);
            if (!std::isfinite(loss.value)) {
                throw TrainingError("loss diverged at epoch " + std::to_string(epoch + 1));
            }
            net.backward(loss.grad);
            adam.step(params);
            loss_sum += loss.value * static_cast<double>(idx.size());
            correct += count_correct(probs, batch_y);
            start = end;
        }

        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.train_loss = loss_sum / static_cast<double>(n);
        stats.train_acc = static_cast<double>(correct) / static_cast<double>(n);
        if (val_x != nullptr && !val_y.empty()) {
            const auto v = evaluate(net, *val_x, val_y);
            stats.val_loss = v.loss;
            stats.val_acc = v.accuracy;
        }
        if (!std::isfinite(stats.train_loss)) {
            throw TrainingError("loss diverged at epoch " + std::to_string(epoch + 1));
        }
        history.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }
    return history;
}

DEEPMAL_NN_END
