#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "deepmal/capture/packet.hpp"

namespace deepmal::capture {

enum class LinkType : std::uint32_t {
    Ethernet = 1,
    LinuxCooked = 113,
};

bool is_supported(std::uint32_t link_type);

/// Result of peeling the link, network and transport headers off one frame.
/// Offsets index into the frame that was dissected.
struct Dissection {
    Address src_addr;
    Address dst_addr;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    Transport transport = Transport::OTHER;
    std::uint8_t tcp_flags = 0;
    std::size_t network_offset = 0;  // first byte of the IP header
    std::size_t network_end = 0;     // one past the last IP byte (link padding excluded)
    std::size_t payload_offset = 0;  // first byte after the transport header
    std::size_t payload_end = 0;

    std::span<const std::uint8_t> payload(std::span<const std::uint8_t> frame) const {
        return frame.subspan(payload_offset, payload_end - payload_offset);
    }
};

/// Thrown for frames whose link or network protocol is not handled. Callers
/// skip and count these; they are not malformed.
class UnsupportedProtocol : public std::exception {
public:
    const char* what() const noexcept override { return "unsupported protocol"; }
};

/// Dissects a frame down to its transport payload. MAC addresses are read past
/// and never surface. Non-first IP fragments and non-TCP/UDP protocols yield
/// Transport::OTHER with the network payload.
///
/// Throws MalformedPacket when the frame is shorter than a header it declares,
/// UnsupportedProtocol for ethertypes other than IPv4/IPv6.
Dissection extract_payload(std::span<const std::uint8_t> frame, LinkType link);

}  // namespace deepmal::capture
