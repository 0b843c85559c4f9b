#include "deepmal/nn/network.hpp"

#include <cstdio>
#include <sstream>

#include "deepmal/util/error.hpp"
#include "deepmal/util/seed.hpp"

DEEPMAL_NN_BEGIN

std::vector<Shape> ModelConfig::infer_shapes() const {
    if (input_shape.empty()) throw ConfigError("model '" + name + "' has no input shape");
    std::vector<Shape> shapes;
    Shape s = input_shape;
    for (const auto& spec : layers) {
        s = infer_output_shape(spec, s);
        shapes.push_back(s);
    }
    return shapes;
}

std::size_t ModelConfig::output_width() const {
    const auto shapes = infer_shapes();
    if (shapes.empty() || shapes.back().size() != 1) {
        throw ConfigError("model '" + name + "' must end in a flat output");
    }
    return shapes.back()[0];
}

nlohmann::json to_json(const ModelConfig& c) {
    nlohmann::json j;
    j["name"] = c.name;
    j["input_shape"] = c.input_shape;
    j["loss"] = to_string(c.loss);
    j["layers"] = nlohmann::json::array();
    for (const auto& l : c.layers) j["layers"].push_back(to_json(l));
    return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.name = j.at("name").get<std::string>();
    c.input_shape = j.at("input_shape").get<Shape>();
    c.loss = loss_kind_from_string(j.at("loss").get<std::string>());
    for (const auto& l : j.at("layers")) c.layers.push_back(layer_spec_from_json(l));
    return c;
}

Network::Network(ModelConfig config, std::uint64_t seed) : config_(std::move(config)), seed_(seed) {
    Shape s = config_.input_shape;
    for (std::size_t i = 0; i < config_.layers.size(); ++i) {
        auto layer = make_layer(config_.layers[i], s, derive_seed(seed_, "layer", i));
        s = layer->output_shape(s);
        layers_.push_back(std::move(layer));
    }
    const auto width = config_.output_width();
    if (config_.loss == LossKind::BinaryCrossEntropy && width != 1) {
        throw ConfigError("binary cross-entropy needs a single output column");
    }
}

Tensor Network::forward(const Tensor& batch, Mode mode) {
    if (batch.rank() == 0) throw ShapeError("empty batch tensor");
    const std::size_t per_row = element_count(config_.input_shape);
    if (batch.row_size() != per_row) {
        throw ShapeError("model '" + config_.name + "' expects " + std::to_string(per_row) +
                         " values per sample, got " + std::to_string(batch.row_size()));
    }
    Shape shape{batch.dim(0)};
    shape.insert(shape.end(), config_.input_shape.begin(), config_.input_shape.end());
    Tensor x = batch.reshaped(std::move(shape));
    for (auto& layer : layers_) x = layer->forward(x, mode);
    return x;
}

void Network::backward(const Tensor& grad_output) {
    Tensor g = grad_output;
    for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g);
}

Tensor Network::predict(const Tensor& inputs, std::size_t batch_size) {
    const std::size_t n = inputs.rank() ? inputs.dim(0) : 0;
    const std::size_t width = config_.output_width();
    Tensor out({n, width});
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        rows.clear();
        for (std::size_t r = start; r < end; ++r) rows.push_back(r);
        const Tensor probs = forward(inputs.gather_rows(rows), Mode::Infer);
        std::copy_n(probs.data(), probs.size(), out.data() + start * width);
    }
    return out;
}

std::vector<Param> Network::params() {
    std::vector<Param> all;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        for (auto p : layers_[i]->params()) {
            p.name = std::to_string(i) + "." + to_string(layers_[i]->kind()) + "." + p.name;
            all.push_back(p);
        }
    }
    return all;
}

std::vector<StateTensor> Network::state() {
    std::vector<StateTensor> all;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        for (auto s : layers_[i]->state()) {
            s.name = std::to_string(i) + "." + to_string(layers_[i]->kind()) + "." + s.name;
            all.push_back(s);
        }
    }
    return all;
}

std::size_t Network::param_count() {
    std::size_t n = 0;
    for (auto& l : layers_) n += l->param_count();
    return n;
}

std::string Network::summary() {
    std::ostringstream out;
    out << "model: " << config_.name << "\n";
    out << "input: " << shape_string(config_.input_shape) << "\n";
    out << "loss: " << to_string(config_.loss) << "\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-4s %-18s %-18s %12s\n", "#", "layer", "output", "params");
    out << line;
    Shape s = config_.input_shape;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        s = layers_[i]->output_shape(s);
        std::snprintf(line, sizeof line, "%-4zu %-18s %-18s %12zu\n", i,
                      to_string(layers_[i]->kind()).c_str(), shape_string(s).c_str(),
                      layers_[i]->param_count());
        out << line;
    }
    out << "total parameters: " << param_count() << "\n";
    return out.str();
}

std::vector<std::uint8_t> predicted_classes(const Tensor& probs, double threshold) {
    const std::size_t n = probs.dim(0), k = probs.row_size();
    std::vector<std::uint8_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (k == 1) {
            out[i] = probs[i] >= threshold ? 1 : 0;
            continue;
        }
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j) {
            if (probs[i * k + j] > probs[i * k + best]) best = j;
        }
        out[i] = static_cast<std::uint8_t>(best);
    }
    return out;
}

DEEPMAL_NN_END
