#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "deepmal/capture/packet.hpp"

namespace deepmal::flow {

using capture::Address;
using capture::ClassId;
using capture::PacketRecord;
using capture::Timestamp;
using capture::Transport;

struct Endpoint {
    Address addr;
    std::uint16_t port = 0;
    auto operator<=>(const Endpoint&) const = default;
};

/// Bidirectional 5-tuple: the lexicographically smaller endpoint is stored
/// first, so both directions of a conversation share one key.
struct FlowKey {
    Endpoint lo;
    Endpoint hi;
    Transport transport = Transport::OTHER;

    static FlowKey of(const PacketRecord& p);
    auto operator<=>(const FlowKey&) const = default;
};

struct FlowRecord {
    FlowKey key;
    Endpoint initiator;  // source of the first packet
    std::vector<PacketRecord> packets;  // earliest min(total, m) packets
    std::size_t total_packets = 0;      // before truncation
    ClassId label = 0;
    Timestamp first_seen;
    Timestamp last_seen;

    /// True when the packet travels initiator -> responder.
    bool is_forward(const PacketRecord& p) const {
        return p.src_addr == initiator.addr && p.src_port == initiator.port;
    }
};

inline constexpr double kDefaultIdleTimeout = 60.0;
inline constexpr std::size_t kKeepAllPackets = std::numeric_limits<std::size_t>::max();

/// Groups packets into flow instances. A gap strictly larger than
/// `idle_timeout` seconds between consecutive packets of a key opens a new
/// instance. Each flow keeps its first `m` packets; flows are returned in
/// order of their first packet.
///
/// Input is stable-sorted by timestamp first, so ties keep capture order.
/// Throws ConfigError for m == 0 or a non-positive timeout.
std::vector<FlowRecord> assemble_flows(std::span<const PacketRecord> packets, double idle_timeout,
                                       std::size_t m);

/// True when at least one retained packet carries payload bytes.
bool has_payload(const FlowRecord& flow);

/// Drops flows whose retained packets are all empty; such flows would map
/// to an all-zero raw-flow slab whatever their class.
std::vector<FlowRecord> drop_empty_flows(std::vector<FlowRecord> flows);

}  // namespace deepmal::flow
