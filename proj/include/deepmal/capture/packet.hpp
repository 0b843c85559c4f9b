#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace deepmal::capture {

enum class Transport : std::uint8_t { TCP, UDP, OTHER };

std::string to_string(Transport t);

/// Network address kept as opaque bytes. IPv4 occupies the first four bytes.
struct Address {
    std::uint8_t family = 4;  // 4 or 6
    std::array<std::uint8_t, 16> bytes{};

    auto operator<=>(const Address&) const = default;

    static Address ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d);
    std::string to_string() const;
};

/// Microseconds since the epoch.
struct Timestamp {
    std::int64_t micros = 0;

    auto operator<=>(const Timestamp&) const = default;
    double seconds() const { return static_cast<double>(micros) * 1e-6; }
    static Timestamp from_seconds(double s);
};

using ClassId = std::uint16_t;

/// TCP flag bits as they appear in the header's flags byte.
namespace tcp_flag {
inline constexpr std::uint8_t FIN = 0x01;
inline constexpr std::uint8_t SYN = 0x02;
inline constexpr std::uint8_t RST = 0x04;
inline constexpr std::uint8_t PSH = 0x08;
inline constexpr std::uint8_t ACK = 0x10;
inline constexpr std::uint8_t URG = 0x20;
}  // namespace tcp_flag

/// One captured packet. Addresses and ports exist for flow keying and expert
/// features only; raw representations read `payload` and nothing else.
struct PacketRecord {
    Timestamp timestamp;
    Address src_addr;
    Address dst_addr;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    Transport transport = Transport::OTHER;
    std::uint8_t tcp_flags = 0;
    std::uint32_t wire_length = 0;  // original on-the-wire frame length
    std::vector<std::uint8_t> payload;
    ClassId label = 0;
};

}  // namespace deepmal::capture
