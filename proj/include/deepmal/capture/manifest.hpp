#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deepmal/capture/pcap.hpp"

namespace deepmal::capture {

/// Ordered set of class names. Index 0 is conventionally "Normal", the
/// negative class of binary tasks.
class ClassSet {
public:
    ClassSet() = default;
    explicit ClassSet(std::vector<std::string> names);

    ClassId id(const std::string& name) const;
    std::optional<ClassId> find(const std::string& name) const;
    ClassId add(const std::string& name);
    const std::string& name(ClassId id) const { return names_.at(id); }
    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }

private:
    std::vector<std::string> names_;
};

struct ManifestEntry {
    std::filesystem::path path;
    ClassId label = 0;
};

/// Labeled list of capture files, one label per file.
///
/// Text form, one entry per line: `<path>\t<label>`. An optional leading
/// `#classes\t<name>\t<name>...` line declares the class set and its order;
/// without it classes are numbered by first appearance. Other `#` lines are
/// comments, except `#max_packets\t<count>` which caps packets read per
/// file. Relative paths resolve against the manifest's directory.
struct CaptureManifest {
    ClassSet classes;
    std::vector<ManifestEntry> entries;
    std::optional<std::size_t> max_packets_per_file;

    static CaptureManifest load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    void validate() const;
};

struct IngestResult {
    /// One packet list per manifest entry, in manifest order.
    std::vector<std::vector<PacketRecord>> per_file;
    std::vector<ParseStats> stats;
};

/// Parses every capture in the manifest, up to `threads` files at a time.
IngestResult ingest(const CaptureManifest& manifest, unsigned threads = 1);

}  // namespace deepmal::capture
