#include "deepmal/flow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "deepmal/util/error.hpp"

namespace deepmal::flow {

FlowKey FlowKey::of(const PacketRecord& p) {
    Endpoint a{p.src_addr, p.src_port};
    Endpoint b{p.dst_addr, p.dst_port};
    if (b < a) std::swap(a, b);
    return FlowKey{a, b, p.transport};
}

std::vector<FlowRecord> assemble_flows(std::span<const PacketRecord> packets, double idle_timeout,
                                       std::size_t m) {
    if (m == 0) throw ConfigError("packets per flow must be at least 1");
    if (!(idle_timeout > 0.0) || !std::isfinite(idle_timeout)) {
        throw ConfigError("idle timeout must be positive");
    }
    const auto timeout_us = static_cast<std::int64_t>(std::llround(idle_timeout * 1e6));

    std::vector<std::size_t> order(packets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return packets[a].timestamp < packets[b].timestamp;
    });

    std::vector<FlowRecord> flows;
    std::map<std::pair<FlowKey, ClassId>, std::size_t> active;
    for (std::size_t idx : order) {
        const PacketRecord& p = packets[idx];
        const auto key = std::make_pair(FlowKey::of(p), p.label);
        auto it = active.find(key);
        if (it != active.end() &&
            p.timestamp.micros - flows[it->second].last_seen.micros > timeout_us) {
            active.erase(it);
            it = active.end();
        }
        if (it == active.end()) {
            FlowRecord f;
            f.key = key.first;
            f.initiator = Endpoint{p.src_addr, p.src_port};
            f.label = p.label;
            f.first_seen = p.timestamp;
            flows.push_back(std::move(f));
            it = active.emplace(key, flows.size() - 1).first;
        }
        FlowRecord& f = flows[it->second];
        if (f.packets.size() < m) f.packets.push_back(p);
        ++f.total_packets;
        f.last_seen = p.timestamp;
    }
    return flows;
}

bool has_payload(const FlowRecord& flow) {
    return std::any_of(flow.packets.begin(), flow.packets.end(),
                       [](const PacketRecord& p) { return !p.payload.empty(); });
}

std::vector<FlowRecord> drop_empty_flows(std::vector<FlowRecord> flows) {
    std::erase_if(flows, [](const FlowRecord& f) { return !has_payload(f); });
    return flows;
}

}  // namespace deepmal::flow
