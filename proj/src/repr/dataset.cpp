#include "deepmal/repr/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "deepmal/util/error.hpp"
#include "deepmal/util/random.hpp"
#include "deepmal/util/seed.hpp"

namespace deepmal::repr {
namespace {

void check_labels(std::span<const std::uint8_t> labels, std::size_t num_classes) {
    for (auto y : labels) {
        if (y >= num_classes) {
            throw DatasetError("label " + std::to_string(y) + " outside the declared " +
                               std::to_string(num_classes) + " classes");
        }
    }
}

}  // namespace

std::string to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::Packets: return "packets";
        case DatasetKind::Flows: return "flows";
        case DatasetKind::Expert: return "expert";
    }
    return "unknown";
}

DatasetKind dataset_kind_from_string(const std::string& name) {
    if (name == "packets") return DatasetKind::Packets;
    if (name == "flows") return DatasetKind::Flows;
    if (name == "expert") return DatasetKind::Expert;
    throw ConfigError("unknown representation '" + name + "' (expected packets, flows or expert)");
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(num_classes(), 0);
    for (auto y : labels) {
        if (y < counts.size()) ++counts[y];
    }
    return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.kind = kind;
    out.class_names = class_names;
    out.feature_names = feature_names;
    out.n = n;
    out.m = m;
    out.idle_timeout = idle_timeout;
    out.inputs = inputs.gather_rows(indices);
    out.labels.reserve(indices.size());
    for (auto i : indices) out.labels.push_back(labels.at(i));
    return out;
}

void Dataset::validate() const {
    if (class_names.empty()) throw DatasetError("dataset declares no classes");
    if (inputs.rank() == 0) throw DatasetError("dataset has no input tensor");
    if (inputs.dim(0) != labels.size()) {
        throw DatasetError("dataset has " + std::to_string(inputs.dim(0)) + " rows but " +
                           std::to_string(labels.size()) + " labels");
    }
    const std::size_t want_rank = kind == DatasetKind::Flows ? 3 : 2;
    if (inputs.rank() != want_rank) {
        throw DatasetError(to_string(kind) + " dataset must have rank " + std::to_string(want_rank));
    }
    if (kind == DatasetKind::Expert && !feature_names.empty() &&
        feature_names.size() != inputs.dim(1)) {
        throw DatasetError("feature names do not match feature columns");
    }
    check_labels(labels, class_names.size());
}

void normalize_packet_into(std::span<const std::uint8_t> payload, std::span<float> out) {
    const std::size_t k = std::min(payload.size(), out.size());
    for (std::size_t i = 0; i < k; ++i) out[i] = static_cast<float>(payload[i]) / 255.0f;
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(k), out.end(), 0.0f);
}

std::vector<float> normalize_packet(std::span<const std::uint8_t> payload, std::size_t n) {
    if (n == 0) throw ConfigError("bytes per packet must be at least 1");
    std::vector<float> out(n);
    normalize_packet_into(payload, out);
    return out;
}

std::vector<std::size_t> select_balanced(std::span<const std::uint8_t> labels,
                                         std::size_t num_classes, const BalancePolicy& policy) {
    check_labels(labels, num_classes);
    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    std::size_t smallest = labels.size();
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (by_class[c].empty()) {
            throw DatasetError("class " + std::to_string(c) + " has no samples");
        }
        smallest = std::min(smallest, by_class[c].size());
    }

    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < num_classes; ++c) {
        auto& idx = by_class[c];
        std::size_t target = policy.balance ? smallest : idx.size();
        if (policy.max_per_class) target = std::min(target, *policy.max_per_class);
        if (target < idx.size()) {
            Rng rng(derive_seed(policy.seed, "balance", c));
            rng.shuffle(std::span<std::size_t>(idx));
            idx.resize(target);
        }
        keep.insert(keep.end(), idx.begin(), idx.end());
    }
    std::sort(keep.begin(), keep.end());
    return keep;
}

Dataset build_packet_dataset(std::span<const capture::PacketRecord> packets, std::size_t n,
                             const std::vector<std::string>& class_names,
                             const BalancePolicy& policy) {
    if (n == 0) throw ConfigError("bytes per packet must be at least 1");
    if (class_names.empty()) throw DatasetError("no classes declared");
    std::vector<std::size_t> source;
    std::vector<std::uint8_t> labels;
    for (std::size_t i = 0; i < packets.size(); ++i) {
        if (policy.drop_empty && packets[i].payload.empty()) continue;
        source.push_back(i);
        labels.push_back(static_cast<std::uint8_t>(packets[i].label));
    }
    const auto keep = select_balanced(labels, class_names.size(), policy);

    Dataset ds;
    ds.kind = DatasetKind::Packets;
    ds.class_names = class_names;
    ds.n = n;
    ds.m = 1;
    ds.inputs = nn::Tensor({keep.size(), n});
    ds.labels.reserve(keep.size());
    for (std::size_t r = 0; r < keep.size(); ++r) {
        const auto& p = packets[source[keep[r]]];
        normalize_packet_into(p.payload, ds.inputs.row(r));
        ds.labels.push_back(labels[keep[r]]);
    }
    return ds;
}

Dataset build_flow_dataset(std::span<const flow::FlowRecord> flows, std::size_t m, std::size_t n,
                           const std::vector<std::string>& class_names,
                           const BalancePolicy& policy) {
    if (n == 0 || m == 0) throw ConfigError("packets per flow and bytes per packet must be positive");
    if (class_names.empty()) throw DatasetError("no classes declared");
    std::vector<std::size_t> source;
    std::vector<std::uint8_t> labels;
    for (std::size_t i = 0; i < flows.size(); ++i) {
        if (policy.drop_empty) {
            bool any = false;
            for (std::size_t k = 0; k < std::min(m, flows[i].packets.size()); ++k) {
                any = any || !flows[i].packets[k].payload.empty();
            }
            if (!any) continue;
        }
        source.push_back(i);
        labels.push_back(static_cast<std::uint8_t>(flows[i].label));
    }
    const auto keep = select_balanced(labels, class_names.size(), policy);

    Dataset ds;
    ds.kind = DatasetKind::Flows;
    ds.class_names = class_names;
    ds.n = n;
    ds.m = m;
    ds.inputs = nn::Tensor({keep.size(), m, n});
    ds.labels.reserve(keep.size());
    for (std::size_t r = 0; r < keep.size(); ++r) {
        const auto& f = flows[source[keep[r]]];
        auto slab = ds.inputs.row(r);
        const std::size_t count = std::min(m, f.packets.size());
        for (std::size_t k = 0; k < count; ++k) {
            normalize_packet_into(f.packets[k].payload, slab.subspan(k * n, n));
        }
        ds.labels.push_back(labels[keep[r]]);
    }
    return ds;
}

}  // namespace deepmal::repr
