#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepmal/capture/manifest.hpp"
#include "deepmal/capture/packet.hpp"

namespace deepmal::synth {

/// Integer payload sizes drawn uniformly from [min, max].
struct SizeRange {
    std::size_t min = 0;
    std::size_t max = 0;
    double weight = 1.0;
};

struct ByteModel {
    enum class Kind { Text, Uniform, Runs };
    Kind kind = Kind::Text;  // Text: printable ASCII 32..126
    std::size_t run_min = 8;  // Runs: constant-value runs of random length
    std::size_t run_max = 24;
};

/// Byte string embedded in payloads at a random offset inside the first
/// `window` bytes.
struct MotifSpec {
    enum class Kind { Fixed, Alternating };
    Kind kind = Kind::Fixed;
    std::vector<std::uint8_t> bytes;  // Fixed
    std::size_t length = 16;          // Alternating: v, 255-v, v, ... with v drawn per use
    double first_packet = 1.0;        // probability in a flow's first packet
    double later_packets = 0.0;       // probability in every other packet
    std::size_t window = 100;

    std::size_t size() const { return kind == Kind::Fixed ? bytes.size() : length; }
};

struct ClassSpec {
    std::string name;
    std::size_t flows = 0;
    std::size_t min_packets = 1;
    std::size_t max_packets = 1;
    std::vector<SizeRange> sizes;
    ByteModel bytes;
    std::vector<MotifSpec> motifs;
    double mean_iat = 0.05;   // seconds, exponential
    double tcp_share = 0.8;   // remaining flows are UDP
};

struct CorpusSpec {
    std::string name;
    std::uint64_t seed = 1;
    double duration = 3600.0;  // flow start times spread over this many seconds
    std::vector<ClassSpec> classes;

    void validate() const;
    static CorpusSpec from_json(const nlohmann::json& j);
    static CorpusSpec load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
    /// Named presets: separable, hard, multiclass4.
    static CorpusSpec preset(const std::string& name);
};

const std::vector<std::string>& preset_names();

/// One class's traffic, time-ordered, as the parser should read it back.
/// `frames` (when given) receives the matching Ethernet frames.
std::vector<capture::PacketRecord> synthesize_class(const CorpusSpec& spec, std::size_t class_index,
                                                    std::vector<std::vector<std::uint8_t>>* frames = nullptr);

/// Draws `count` payload sizes from a class's size mixture.
std::vector<std::size_t> sample_sizes(const ClassSpec& spec, std::size_t count, std::uint64_t seed);

/// Analytic CDF of the size mixture at integer x.
double size_cdf(const ClassSpec& spec, double x);

/// Kolmogorov-Smirnov distance between integer samples and a CDF.
double ks_distance(std::vector<std::size_t> samples, const std::function<double(double)>& cdf);

struct GeneratedCorpus {
    std::filesystem::path manifest_path;
    capture::CaptureManifest manifest;
    std::vector<std::size_t> packets_per_file;
};

/// Writes `<class>.pcap` per class plus `manifest.tsv` into `out_dir`.
GeneratedCorpus generate_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir, unsigned threads = 1);

}  // namespace deepmal::synth
