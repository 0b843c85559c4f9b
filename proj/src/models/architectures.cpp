#include "deepmal/models/architectures.hpp"

#include "deepmal/util/error.hpp"

namespace deepmal::models {
namespace {

using nn::LayerSpec;

void conv_block(std::vector<LayerSpec>& layers, std::size_t filters) {
    layers.push_back(LayerSpec::conv1d(filters, 5));
    layers.push_back(LayerSpec::spatial_batchnorm());
    layers.push_back(LayerSpec::relu());
    layers.push_back(LayerSpec::dropout(0.25));
}

void dense_block(std::vector<LayerSpec>& layers, std::size_t units) {
    layers.push_back(LayerSpec::dense(units));
    layers.push_back(LayerSpec::batchnorm());
    layers.push_back(LayerSpec::relu());
    layers.push_back(LayerSpec::dropout(0.5));
}

std::vector<LayerSpec> packets_body() {
    std::vector<LayerSpec> layers;
    conv_block(layers, 32);
    conv_block(layers, 64);
    layers.push_back(LayerSpec::maxpool1d(8));
    layers.push_back(LayerSpec::lstm(200, true));
    layers.push_back(LayerSpec::flatten());
    dense_block(layers, 200);
    dense_block(layers, 200);
    return layers;
}

void check_packet_bytes(std::size_t n) {
    if (n < kMinPacketBytes) {
        throw ConfigError("packet models need at least " + std::to_string(kMinPacketBytes) +
                          " bytes per packet, got " + std::to_string(n));
    }
}

}  // namespace

std::string to_string(Architecture arch) {
    switch (arch) {
        case Architecture::PacketsBinary: return "packets-binary";
        case Architecture::FlowsBinary: return "flows-binary";
        case Architecture::PacketsMulticlass: return "packets-multiclass";
    }
    return "unknown";
}

Architecture architecture_from_string(const std::string& name) {
    if (name == "packets-binary") return Architecture::PacketsBinary;
    if (name == "flows-binary") return Architecture::FlowsBinary;
    if (name == "packets-multiclass") return Architecture::PacketsMulticlass;
    throw ConfigError("unknown architecture '" + name +
                      "' (expected packets-binary, flows-binary or packets-multiclass)");
}

nn::ModelConfig build_packets_binary(std::size_t n) {
    check_packet_bytes(n);
    nn::ModelConfig c;
    c.name = "packets-binary";
    c.input_shape = {n, 1};
    c.layers = packets_body();
    c.layers.push_back(LayerSpec::dense(1, nn::Init::GlorotUniform));
    c.layers.push_back(LayerSpec::sigmoid());
    c.loss = nn::LossKind::BinaryCrossEntropy;
    return c;
}

nn::ModelConfig build_flows_binary(std::size_t m, std::size_t n) {
    if (m == 0 || n == 0 || m * n < 5) {
        throw ConfigError("flow model needs m*n >= 5, got m=" + std::to_string(m) +
                          " n=" + std::to_string(n));
    }
    nn::ModelConfig c;
    c.name = "flows-binary";
    c.input_shape = {m * n, 1};
    conv_block(c.layers, 32);
    c.layers.push_back(LayerSpec::flatten());
    dense_block(c.layers, 50);
    dense_block(c.layers, 100);
    c.layers.push_back(LayerSpec::dense(1, nn::Init::GlorotUniform));
    c.layers.push_back(LayerSpec::sigmoid());
    c.loss = nn::LossKind::BinaryCrossEntropy;
    return c;
}

nn::ModelConfig build_packets_multiclass(std::size_t n, std::size_t k) {
    check_packet_bytes(n);
    if (k < 2) throw ConfigError("multi-class model needs at least 2 classes");
    nn::ModelConfig c;
    c.name = "packets-multiclass";
    c.input_shape = {n, 1};
    c.layers = packets_body();
    c.layers.push_back(LayerSpec::dense(k, nn::Init::GlorotUniform));
    c.layers.push_back(LayerSpec::softmax());
    c.loss = nn::LossKind::CategoricalCrossEntropy;
    return c;
}

nn::ModelConfig build_architecture(Architecture arch, std::size_t n, std::size_t m, std::size_t k) {
    switch (arch) {
        case Architecture::PacketsBinary: return build_packets_binary(n);
        case Architecture::FlowsBinary: return build_flows_binary(m, n);
        case Architecture::PacketsMulticlass: return build_packets_multiclass(n, k);
    }
    throw ConfigError("unknown architecture");
}

const std::vector<std::string>& botnet_classes() {
    static const std::vector<std::string> names{"Normal", "Neris", "Rbot", "Virut"};
    return names;
}

}  // namespace deepmal::models
