#include "deepmal/capture/packet.hpp"

#include <cmath>
#include <cstdio>

namespace deepmal::capture {

std::string to_string(Transport t) {
    switch (t) {
        case Transport::TCP: return "TCP";
        case Transport::UDP: return "UDP";
        case Transport::OTHER: return "OTHER";
    }
    return "OTHER";
}

Address Address::ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
    Address addr;
    addr.family = 4;
    addr.bytes[0] = a;
    addr.bytes[1] = b;
    addr.bytes[2] = c;
    addr.bytes[3] = d;
    return addr;
}

std::string Address::to_string() const {
    char buf[64];
    if (family == 4) {
        std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", bytes[0], bytes[1], bytes[2], bytes[3]);
        return buf;
    }
    std::string out;
    for (int i = 0; i < 16; i += 2) {
        std::snprintf(buf, sizeof buf, "%s%x", i ? ":" : "", (bytes[i] << 8) | bytes[i + 1]);
        out += buf;
    }
    return out;
}

Timestamp Timestamp::from_seconds(double s) {
    return Timestamp{static_cast<std::int64_t>(std::llround(s * 1e6))};
}

}  // namespace deepmal::capture
