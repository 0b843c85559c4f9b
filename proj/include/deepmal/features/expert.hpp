#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "deepmal/flow/flow.hpp"
#include "deepmal/repr/dataset.hpp"

namespace deepmal::features {

/// Percentile levels sampled from every distributional family.
inline constexpr double kPercentiles[] = {1,  5,  10, 15, 20, 25, 30, 35, 40, 45, 50,
                                          55, 60, 65, 70, 75, 80, 85, 90, 95, 99};
/// 21 percentiles plus min, avg, max, std.
inline constexpr std::size_t kStatsPerFamily = std::size(kPercentiles) + 4;
inline constexpr std::size_t kFamilyCount = 7;
inline constexpr std::size_t kScalarCount = 29;
inline constexpr std::size_t kFeatureCount = kFamilyCount * kStatsPerFamily + kScalarCount;

/// Slot names in vector order; also the CSV header.
const std::vector<std::string>& feature_names();

/// Capture-level facts about a flow's endpoints.
struct FlowContext {
    std::size_t initiator_addr_flows = 1;  // flows in the capture opened by this address
    std::size_t responder_addr_flows = 1;  // flows in the capture answered by this address
};

/// Linear interpolation between closest ranks of an ascending sample
/// (p in [0, 100]); 0 for an empty sample.
double percentile(std::span<const double> sorted, double p);

/// Feature vector of one untruncated flow. Packet sizes are wire lengths;
/// inter-arrival families are all zero for single-packet directions;
/// throughput divides bytes by max(duration, 1 us).
std::vector<double> extract_expert_features(const flow::FlowRecord& flow, const FlowContext& ctx = {});

/// Address-reuse counts for every flow of one capture.
std::vector<FlowContext> flow_contexts(std::span<const flow::FlowRecord> flows);

/// Expert-feature dataset; rows follow `flows` order after balancing.
/// `contexts` parallels `flows`; when empty it is computed over all flows.
repr::Dataset build_expert_dataset(std::span<const flow::FlowRecord> flows,
                                   const std::vector<std::string>& class_names,
                                   const repr::BalancePolicy& policy = {},
                                   std::span<const FlowContext> contexts = {});

}  // namespace deepmal::features
