#include "deepmal/capture/dissect.hpp"

#include <algorithm>
#include <string>

#include "deepmal/util/error.hpp"

namespace deepmal::capture {
namespace {

constexpr std::uint16_t kEtherIPv4 = 0x0800;
constexpr std::uint16_t kEtherIPv6 = 0x86DD;
constexpr std::uint16_t kEtherVlan = 0x8100;
constexpr std::uint16_t kEtherQinQ = 0x88A8;
constexpr std::uint16_t kEtherQinQOld = 0x9100;

constexpr std::uint8_t kProtoTCP = 6;
constexpr std::uint8_t kProtoUDP = 17;

std::uint16_t be16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

void need(std::span<const std::uint8_t> frame, std::size_t end, const char* what) {
    if (frame.size() < end) {
        throw MalformedPacket(std::string("frame too short for ") + what + " (need " +
                              std::to_string(end) + ", have " + std::to_string(frame.size()) +
                              ")");
    }
}

bool is_vlan(std::uint16_t ethertype) {
    return ethertype == kEtherVlan || ethertype == kEtherQinQ || ethertype == kEtherQinQOld;
}

// Returns the ethertype and the offset of the network header.
std::pair<std::uint16_t, std::size_t> link_layer(std::span<const std::uint8_t> frame,
                                                 LinkType link) {
    std::size_t off = 0;
    std::uint16_t ethertype = 0;
    if (link == LinkType::Ethernet) {
        need(frame, 14, "Ethernet header");
        ethertype = be16(frame, 12);
        off = 14;
    } else if (link == LinkType::LinuxCooked) {
        need(frame, 16, "Linux cooked header");
        ethertype = be16(frame, 14);
        off = 16;
    } else {
        throw UnsupportedProtocol();
    }
    for (int tags = 0; tags < 2 && is_vlan(ethertype); ++tags) {
        need(frame, off + 4, "VLAN tag");
        ethertype = be16(frame, off + 2);
        off += 4;
    }
    return {ethertype, off};
}

void transport_layer(std::span<const std::uint8_t> frame, std::uint8_t proto, std::size_t off,
                     Dissection& d) {
    if (proto == kProtoTCP) {
        need(frame, off + 20, "TCP header");
        const std::size_t header_len = static_cast<std::size_t>(frame[off + 12] >> 4) * 4;
        if (header_len < 20) throw MalformedPacket("TCP data offset below 5");
        if (off + header_len > d.network_end) throw MalformedPacket("TCP options overrun packet");
        d.transport = Transport::TCP;
        d.src_port = be16(frame, off);
        d.dst_port = be16(frame, off + 2);
        d.tcp_flags = frame[off + 13] & 0x3F;
        d.payload_offset = off + header_len;
        d.payload_end = d.network_end;
    } else if (proto == kProtoUDP) {
        need(frame, off + 8, "UDP header");
        if (off + 8 > d.network_end) throw MalformedPacket("UDP header overruns packet");
        d.transport = Transport::UDP;
        d.src_port = be16(frame, off);
        d.dst_port = be16(frame, off + 2);
        const std::size_t udp_len = be16(frame, off + 4);
        if (udp_len < 8) throw MalformedPacket("UDP length below header size");
        d.payload_offset = off + 8;
        d.payload_end = std::min(d.network_end, off + udp_len);
    } else {
        d.transport = Transport::OTHER;
        d.payload_offset = off;
        d.payload_end = d.network_end;
    }
}

void ipv4(std::span<const std::uint8_t> frame, std::size_t off, Dissection& d) {
    need(frame, off + 20, "IPv4 header");
    if ((frame[off] >> 4) != 4) throw MalformedPacket("IPv4 version mismatch");
    const std::size_t ihl = static_cast<std::size_t>(frame[off] & 0x0F) * 4;
    if (ihl < 20) throw MalformedPacket("IPv4 IHL below 5");
    const std::size_t total = be16(frame, off + 2);
    if (total < ihl) throw MalformedPacket("IPv4 total length below header length");
    need(frame, off + ihl, "IPv4 options");
    d.network_offset = off;
    // Snapped frames hold fewer bytes than the IP length claims.
    d.network_end = std::min(frame.size(), off + total);
    d.src_addr = Address::ipv4(frame[off + 12], frame[off + 13], frame[off + 14], frame[off + 15]);
    d.dst_addr = Address::ipv4(frame[off + 16], frame[off + 17], frame[off + 18], frame[off + 19]);
    const std::uint16_t fragment_offset = be16(frame, off + 6) & 0x1FFF;
    const std::uint8_t proto = frame[off + 9];
    if (fragment_offset != 0) {
        transport_layer(frame, 0xFF, off + ihl, d);
        return;
    }
    transport_layer(frame, proto, off + ihl, d);
}

void ipv6(std::span<const std::uint8_t> frame, std::size_t off, Dissection& d) {
    need(frame, off + 40, "IPv6 header");
    if ((frame[off] >> 4) != 6) throw MalformedPacket("IPv6 version mismatch");
    d.network_offset = off;
    d.network_end = std::min(frame.size(), off + 40 + be16(frame, off + 4));
    d.src_addr.family = 6;
    d.dst_addr.family = 6;
    std::copy_n(frame.begin() + static_cast<std::ptrdiff_t>(off + 8), 16, d.src_addr.bytes.begin());
    std::copy_n(frame.begin() + static_cast<std::ptrdiff_t>(off + 24), 16, d.dst_addr.bytes.begin());

    std::uint8_t next = frame[off + 6];
    std::size_t pos = off + 40;
    for (;;) {
        switch (next) {
            case 0:    // hop-by-hop
            case 43:   // routing
            case 60:   // destination options
            case 135:  // mobility
                need(frame, pos + 2, "IPv6 extension header");
                next = frame[pos];
                pos += (static_cast<std::size_t>(frame[pos + 1]) + 1) * 8;
                continue;
            case 51:  // authentication header
                need(frame, pos + 2, "IPv6 AH");
                next = frame[pos];
                pos += (static_cast<std::size_t>(frame[pos + 1]) + 2) * 4;
                continue;
            case 44: {  // fragment
                need(frame, pos + 8, "IPv6 fragment header");
                const std::uint16_t frag_off = be16(frame, pos + 2) >> 3;
                next = frame[pos];
                pos += 8;
                if (frag_off != 0) {
                    if (pos > d.network_end) throw MalformedPacket("IPv6 headers overrun packet");
                    transport_layer(frame, 0xFF, pos, d);
                    return;
                }
                continue;
            }
            default:
                break;
        }
        break;
    }
    if (pos > d.network_end) throw MalformedPacket("IPv6 headers overrun packet");
    transport_layer(frame, next, pos, d);
}

}  // namespace

bool is_supported(std::uint32_t link_type) {
    return link_type == static_cast<std::uint32_t>(LinkType::Ethernet) ||
           link_type == static_cast<std::uint32_t>(LinkType::LinuxCooked);
}

Dissection extract_payload(std::span<const std::uint8_t> frame, LinkType link) {
    const auto [ethertype, off] = link_layer(frame, link);
    Dissection d;
    if (ethertype == kEtherIPv4) {
        ipv4(frame, off, d);
    } else if (ethertype == kEtherIPv6) {
        ipv6(frame, off, d);
    } else {
        throw UnsupportedProtocol();
    }
    if (d.transport == Transport::OTHER) {
        d.src_port = 0;
        d.dst_port = 0;
    }
    return d;
}

}  // namespace deepmal::capture
