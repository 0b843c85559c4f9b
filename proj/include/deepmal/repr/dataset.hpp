#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deepmal/capture/packet.hpp"
#include "deepmal/flow/flow.hpp"
#include "deepmal/nn/tensor.hpp"

namespace deepmal::repr {

enum class DatasetKind : std::uint8_t { Packets = 0, Flows = 1, Expert = 2 };

std::string to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(const std::string& name);

/// Labeled sample matrix. Shapes by kind:
///   Packets (N, n), Flows (N, m, n), Expert (N, features).
struct Dataset {
    DatasetKind kind = DatasetKind::Packets;
    nn::Tensor inputs;
    std::vector<std::uint8_t> labels;
    std::vector<std::string> class_names;
    std::vector<std::string> feature_names;  // expert datasets only
    std::size_t n = 0;
    std::size_t m = 0;
    double idle_timeout = flow::kDefaultIdleTimeout;

    std::size_t size() const { return labels.size(); }
    std::size_t num_classes() const { return class_names.size(); }
    std::vector<std::size_t> class_counts() const;
    /// Rows `indices` in the given order; metadata is copied.
    Dataset subset(std::span<const std::size_t> indices) const;
    /// Checks shape/label consistency; throws DatasetError.
    void validate() const;
};

/// byte / 255 for the first min(len, n) bytes, 0.0 afterwards.
std::vector<float> normalize_packet(std::span<const std::uint8_t> payload, std::size_t n);
void normalize_packet_into(std::span<const std::uint8_t> payload, std::span<float> out);

struct BalancePolicy {
    /// Downsample every class to the size of the smallest one.
    bool balance = true;
    /// Per-class cap applied after balancing.
    std::optional<std::size_t> max_per_class;
    /// Skip packets (or flows) without any payload byte.
    bool drop_empty = true;
    std::uint64_t seed = 1;
};

/// Indices kept by `policy`, ascending. Sampling within a class is uniform
/// without replacement. Throws DatasetError when a declared class has no
/// samples.
std::vector<std::size_t> select_balanced(std::span<const std::uint8_t> labels,
                                         std::size_t num_classes, const BalancePolicy& policy);

Dataset build_packet_dataset(std::span<const capture::PacketRecord> packets, std::size_t n,
                             const std::vector<std::string>& class_names,
                             const BalancePolicy& policy = {});

Dataset build_flow_dataset(std::span<const flow::FlowRecord> flows, std::size_t m, std::size_t n,
                           const std::vector<std::string>& class_names,
                           const BalancePolicy& policy = {});

struct SplitSpec {
    double train = 0.8;
    double validation = 0.1;
    double test = 0.1;
    std::uint64_t seed = 1;

    void validate() const;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

/// Stratified split. Subset sizes are round(fraction * N) for validation and
/// test, with the remainder going to train; each class contributes its
/// proportional share (largest-remainder rounding, so within one sample).
/// Index lists are ascending. Throws DatasetError when a subset is empty.
SplitIndices split_indices(std::span<const std::uint8_t> labels, std::size_t num_classes,
                           const SplitSpec& spec);

struct DatasetSplit {
    Dataset train;
    Dataset validation;
    Dataset test;
};

DatasetSplit split_dataset(const Dataset& dataset, const SplitSpec& spec);

/// Binary container:
///   "DMDS" | u32 version | u8 kind | u32 rank | u64 dims[rank]
///   | u32 classes, strings | u32 features, strings | u64 n | u64 m | f64 idle
///   | f32 data (row-major) | u8 labels[N]
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// One row per sample: class name, then every input value.
void export_csv(const Dataset& dataset, const std::filesystem::path& path);

/// Column names of the CSV export (without the leading label column).
std::vector<std::string> column_names(const Dataset& dataset);

}  // namespace deepmal::repr
