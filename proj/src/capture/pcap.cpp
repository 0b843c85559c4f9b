#include "deepmal/capture/pcap.hpp"

#include <array>
#include <bit>
#include <cstring>

#include "deepmal/util/error.hpp"

namespace deepmal::capture {
namespace {

std::uint32_t load_u32(const std::uint8_t* p) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return v;
}

std::uint16_t load_u16(const std::uint8_t* p) {
    std::uint16_t v;
    std::memcpy(&v, p, 2);
    return v;
}

void store_u32(std::uint8_t* p, std::uint32_t v) { std::memcpy(p, &v, 4); }
void store_u16(std::uint8_t* p, std::uint16_t v) { std::memcpy(p, &v, 2); }

std::uint32_t swap32(std::uint32_t v) { return __builtin_bswap32(v); }
std::uint16_t swap16(std::uint16_t v) { return __builtin_bswap16(v); }

constexpr std::uint32_t kMaxRecord = 256u * 1024u * 1024u;

}  // namespace

PcapReader::PcapReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw IngestError("cannot open capture " + path.string());
    std::array<std::uint8_t, 24> g{};
    in_.read(reinterpret_cast<char*>(g.data()), g.size());
    if (in_.gcount() < 4) throw FormatError("capture too short for a magic number: " + path.string());
    const std::uint32_t magic = load_u32(g.data());
    if (magic == kPcapMagicMicros) {
        header_.swapped = false;
    } else if (magic == swap32(kPcapMagicMicros)) {
        header_.swapped = true;
    } else if (magic == kPcapMagicNanos) {
        header_.nanosecond = true;
    } else if (magic == swap32(kPcapMagicNanos)) {
        header_.swapped = true;
        header_.nanosecond = true;
    } else {
        throw FormatError("unrecognized capture magic in " + path.string());
    }
    if (in_.gcount() < 24) throw FormatError("truncated pcap global header in " + path.string());
    auto fix16 = [&](std::uint16_t v) { return header_.swapped ? swap16(v) : v; };
    header_.version_major = fix16(load_u16(g.data() + 4));
    header_.version_minor = fix16(load_u16(g.data() + 6));
    header_.snaplen = fix(load_u32(g.data() + 16));
    header_.link_type = fix(load_u32(g.data() + 20)) & 0x0FFFFFFF;
}

std::uint32_t PcapReader::fix(std::uint32_t v) const {
    return header_.swapped ? swap32(v) : v;
}

std::optional<RawRecord> PcapReader::next() {
    if (truncated_) return std::nullopt;
    std::array<std::uint8_t, 16> h{};
    in_.read(reinterpret_cast<char*>(h.data()), h.size());
    const auto got = in_.gcount();
    if (got == 0) return std::nullopt;
    if (got < 16) {
        truncated_ = true;
        return std::nullopt;
    }
    const std::uint32_t sec = fix(load_u32(h.data()));
    const std::uint32_t frac = fix(load_u32(h.data() + 4));
    const std::uint32_t incl = fix(load_u32(h.data() + 8));
    const std::uint32_t orig = fix(load_u32(h.data() + 12));
    if (incl > kMaxRecord) throw FormatError("implausible pcap record length");

    RawRecord rec;
    const std::int64_t micros = header_.nanosecond ? frac / 1000 : frac;
    rec.timestamp = Timestamp{static_cast<std::int64_t>(sec) * 1'000'000 + micros};
    rec.orig_len = orig;
    rec.data.resize(incl);
    in_.read(reinterpret_cast<char*>(rec.data.data()), incl);
    if (static_cast<std::uint32_t>(in_.gcount()) != incl) {
        truncated_ = true;
        return std::nullopt;
    }
    return rec;
}

PcapWriter::PcapWriter(const std::filesystem::path& path, std::uint32_t link_type,
                       std::uint32_t snaplen)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw IngestError("cannot create capture " + path.string());
    std::array<std::uint8_t, 24> g{};
    store_u32(g.data(), kPcapMagicMicros);
    store_u16(g.data() + 4, 2);
    store_u16(g.data() + 6, 4);
    store_u32(g.data() + 16, snaplen);
    store_u32(g.data() + 20, link_type);
    out_.write(reinterpret_cast<const char*>(g.data()), g.size());
}

void PcapWriter::write(Timestamp ts, std::span<const std::uint8_t> frame) {
    write(ts, frame, static_cast<std::uint32_t>(frame.size()));
}

void PcapWriter::write(Timestamp ts, std::span<const std::uint8_t> captured,
                       std::uint32_t orig_len) {
    std::array<std::uint8_t, 16> h{};
    store_u32(h.data(), static_cast<std::uint32_t>(ts.micros / 1'000'000));
    store_u32(h.data() + 4, static_cast<std::uint32_t>(ts.micros % 1'000'000));
    store_u32(h.data() + 8, static_cast<std::uint32_t>(captured.size()));
    store_u32(h.data() + 12, orig_len);
    out_.write(reinterpret_cast<const char*>(h.data()), h.size());
    out_.write(reinterpret_cast<const char*>(captured.data()),
               static_cast<std::streamsize>(captured.size()));
    if (!out_) throw IngestError("write failed: " + path_.string());
}

void PcapWriter::close() {
    out_.close();
    if (!out_) throw IngestError("close failed: " + path_.string());
}

ParsedCapture parse_capture(const std::filesystem::path& path, ClassId label,
                            std::size_t max_packets) {
    PcapReader reader(path);
    ParsedCapture result;
    auto& stats = result.stats;
    const bool link_ok = is_supported(reader.header().link_type);
    const auto link = static_cast<LinkType>(reader.header().link_type);
    if (!link_ok) {
        stats.warnings.push_back("unsupported link type " +
                                 std::to_string(reader.header().link_type) + " in " +
                                 path.string());
    }

    while (auto rec = reader.next()) {
        ++stats.records;
        if (!link_ok) {
            ++stats.skipped_unsupported;
            continue;
        }
        const std::span<const std::uint8_t> frame(rec->data);
        Dissection d;
        try {
            d = extract_payload(frame, link);
        } catch (const UnsupportedProtocol&) {
            ++stats.skipped_unsupported;
            continue;
        } catch (const MalformedPacket&) {
            ++stats.skipped_malformed;
            continue;
        }
        PacketRecord p;
        p.timestamp = rec->timestamp;
        p.src_addr = d.src_addr;
        p.dst_addr = d.dst_addr;
        p.src_port = d.src_port;
        p.dst_port = d.dst_port;
        p.transport = d.transport;
        p.tcp_flags = d.tcp_flags;
        p.wire_length = rec->orig_len;
        const auto payload = d.payload(frame);
        p.payload.assign(payload.begin(), payload.end());
        p.label = label;
        result.packets.push_back(std::move(p));
        ++stats.packets;
        if (max_packets != 0 && result.packets.size() >= max_packets) break;
    }
    if (reader.truncated()) {
        stats.truncated = true;
        stats.warnings.push_back("truncated final record in " + path.string());
    }
    return result;
}

}  // namespace deepmal::capture
