#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepmal/nn/network.hpp"
#include "deepmal/nn/trainer.hpp"

DEEPMAL_NN_BEGIN

/// Self-describing binary container shared by network and shallow-model
/// checkpoints:
///
///   "DMCK" | u32 version | string header-json | u32 blob-count
///   per blob: string name | u8 dtype | u32 rank | u64 dims[rank] | data
///
/// All integers little-endian; strings are u32 length + bytes.
struct Blob {
    enum class DType : std::uint8_t { F32 = 0, F64 = 1, I64 = 2 };

    std::string name;
    DType dtype = DType::F32;
    std::vector<std::uint64_t> shape;
    std::vector<double> values;  // widened on load, narrowed on save

    std::size_t count() const;
};

struct Container {
    nlohmann::json header;
    std::vector<Blob> blobs;

    const Blob& blob(const std::string& name) const;
    void save(const std::filesystem::path& path) const;
    static Container load(const std::filesystem::path& path);
};

inline constexpr std::uint32_t kContainerVersion = 1;

nlohmann::json to_json(const History& history);
History history_from_json(const nlohmann::json& j);

/// Adds the network's config, seed, parameters and running statistics to a
/// container. The header gains "kind": "network".
void store_network(Network& net, Container& out);
Network restore_network(const Container& in);

DEEPMAL_NN_END
