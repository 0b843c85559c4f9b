#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "deepmal/nn/network.hpp"

namespace deepmal::models {

enum class Architecture { PacketsBinary, FlowsBinary, PacketsMulticlass };

/// CLI preset names: packets-binary, flows-binary, packets-multiclass.
std::string to_string(Architecture arch);
Architecture architecture_from_string(const std::string& name);

inline constexpr std::size_t kMinPacketBytes = 40;

/// Two conv blocks, max-pool 8, LSTM(200) over every step, two FC(200)
/// blocks, sigmoid head. Input is one byte channel of length n >= 40.
nn::ModelConfig build_packets_binary(std::size_t n);

/// The (m, n) slab is read as a single length m*n byte channel: one conv
/// block, FC(50) and FC(100) blocks, sigmoid head. Requires m*n >= 5.
nn::ModelConfig build_flows_binary(std::size_t m, std::size_t n);

/// packets-binary body with a k-way softmax head, k >= 2.
nn::ModelConfig build_packets_multiclass(std::size_t n, std::size_t k);

/// Builds `arch` for inputs with n bytes per packet, m packets per flow and
/// k classes; parameters not used by the architecture are ignored.
nn::ModelConfig build_architecture(Architecture arch, std::size_t n, std::size_t m, std::size_t k);

/// Reporting order of the botnet classes.
const std::vector<std::string>& botnet_classes();

}  // namespace deepmal::models
