#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deepmal/capture/dissect.hpp"
#include "deepmal/capture/packet.hpp"

namespace deepmal::capture {

inline constexpr std::uint32_t kPcapMagicMicros = 0xA1B2C3D4;
inline constexpr std::uint32_t kPcapMagicNanos = 0xA1B23C4D;

struct PcapHeader {
    bool swapped = false;
    bool nanosecond = false;
    std::uint16_t version_major = 2;
    std::uint16_t version_minor = 4;
    std::uint32_t snaplen = 65535;
    std::uint32_t link_type = 1;
};

struct RawRecord {
    Timestamp timestamp;
    std::uint32_t orig_len = 0;
    std::vector<std::uint8_t> data;
};

/// Sequential reader over a classic pcap file (either byte order, micro or
/// nanosecond timestamps).
class PcapReader {
public:
    explicit PcapReader(const std::filesystem::path& path);

    const PcapHeader& header() const { return header_; }

    /// Next record, or nullopt at end of file. A final record cut short leaves
    /// `truncated()` set and ends the stream.
    std::optional<RawRecord> next();
    bool truncated() const { return truncated_; }

private:
    std::uint32_t fix(std::uint32_t v) const;

    std::ifstream in_;
    PcapHeader header_;
    bool truncated_ = false;
};

/// Writes microsecond-resolution little-endian pcap files.
class PcapWriter {
public:
    PcapWriter(const std::filesystem::path& path, std::uint32_t link_type = 1,
               std::uint32_t snaplen = 65535);

    void write(Timestamp ts, std::span<const std::uint8_t> frame);
    void write(Timestamp ts, std::span<const std::uint8_t> captured, std::uint32_t orig_len);
    void close();

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

struct ParseStats {
    std::size_t records = 0;
    std::size_t packets = 0;
    std::size_t skipped_unsupported = 0;  // link type or network protocol
    std::size_t skipped_malformed = 0;
    bool truncated = false;
    std::vector<std::string> warnings;

    std::size_t skipped() const { return skipped_unsupported + skipped_malformed; }
};

struct ParsedCapture {
    std::vector<PacketRecord> packets;
    ParseStats stats;
};

/// Reads a capture file and dissects every record. `max_packets` caps the
/// number of emitted packets (0 = unlimited).
///
/// Throws IngestError for unreadable files, FormatError for unknown magic.
ParsedCapture parse_capture(const std::filesystem::path& path, ClassId label,
                            std::size_t max_packets = 0);

}  // namespace deepmal::capture
