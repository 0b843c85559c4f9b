#include "deepmal/synth/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include "deepmal/capture/pcap.hpp"
#include "deepmal/util/error.hpp"
#include "deepmal/util/parallel.hpp"
#include "deepmal/util/random.hpp"
#include "deepmal/util/seed.hpp"

namespace deepmal::synth {
namespace {

using capture::Address;
using capture::PacketRecord;
using capture::Timestamp;
using capture::Transport;

constexpr std::int64_t kEpochMicros = 1'600'000'000'000'000;
constexpr std::uint16_t kServerPorts[] = {80, 443, 8080, 25, 53, 123};
constexpr std::size_t kClients = 64;
constexpr std::size_t kServers = 16;

std::vector<std::uint8_t> hex_bytes(const std::string& hex) {
    if (hex.size() % 2 != 0) throw ConfigError("motif hex string has odd length");
    std::vector<std::uint8_t> out;
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        out.push_back(static_cast<std::uint8_t>(std::stoul(hex.substr(i, 2), nullptr, 16)));
    }
    return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (auto b : bytes) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 15]);
    }
    return s;
}

std::size_t draw_size(const ClassSpec& c, Rng& rng) {
    double total = 0.0;
    for (const auto& r : c.sizes) total += r.weight;
    double u = rng.uniform() * total;
    const SizeRange* pick = &c.sizes.back();
    for (const auto& r : c.sizes) {
        if (u < r.weight) {
            pick = &r;
            break;
        }
        u -= r.weight;
    }
    return static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(pick->min), static_cast<std::int64_t>(pick->max)));
}

void fill_background(std::vector<std::uint8_t>& payload, const ByteModel& model, Rng& rng) {
    switch (model.kind) {
        case ByteModel::Kind::Text:
            for (auto& b : payload) b = static_cast<std::uint8_t>(rng.between(32, 126));
            break;
        case ByteModel::Kind::Uniform:
            for (auto& b : payload) b = static_cast<std::uint8_t>(rng.below(256));
            break;
        case ByteModel::Kind::Runs:
            for (std::size_t i = 0; i < payload.size();) {
                const auto len = static_cast<std::size_t>(
                    rng.between(static_cast<std::int64_t>(model.run_min), static_cast<std::int64_t>(model.run_max)));
                const auto v = static_cast<std::uint8_t>(rng.below(256));
                for (std::size_t k = 0; k < len && i < payload.size(); ++k) payload[i++] = v;
            }
            break;
    }
}

void embed_motifs(std::vector<std::uint8_t>& payload, const std::vector<MotifSpec>& motifs, bool first, Rng& rng) {
    std::vector<std::pair<std::size_t, std::size_t>> used;
    for (const auto& m : motifs) {
        if (!rng.bernoulli(first ? m.first_packet : m.later_packets)) continue;
        const std::size_t len = m.size();
        const std::size_t limit = std::min(m.window, payload.size());
        if (len == 0 || len > limit) continue;
        std::vector<std::uint8_t> bytes = m.bytes;
        if (m.kind == MotifSpec::Kind::Alternating) {
            const auto v = static_cast<std::uint8_t>(rng.below(256));
            bytes.resize(len);
            for (std::size_t k = 0; k < len; ++k) bytes[k] = k % 2 == 0 ? v : static_cast<std::uint8_t>(255 - v);
        }
        // Motifs never overlap; a motif is dropped when no free slot turns up.
        for (int attempt = 0; attempt < 32; ++attempt) {
            const auto off = static_cast<std::size_t>(rng.below(limit - len + 1));
            const bool clash = std::any_of(used.begin(), used.end(), [&](const auto& u) {
                return off < u.first + u.second && u.first < off + len;
            });
            if (clash) continue;
            std::copy(bytes.begin(), bytes.end(), payload.begin() + static_cast<std::ptrdiff_t>(off));
            used.emplace_back(off, len);
            break;
        }
    }
}

std::uint16_t ip_checksum(const std::uint8_t* h, std::size_t len) {
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i + 1 < len; i += 2) sum += static_cast<std::uint32_t>(h[i] << 8 | h[i + 1]);
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum);
}

void put16(std::vector<std::uint8_t>& f, std::size_t at, std::uint16_t v) {
    f[at] = static_cast<std::uint8_t>(v >> 8);
    f[at + 1] = static_cast<std::uint8_t>(v);
}

void put32(std::vector<std::uint8_t>& f, std::size_t at, std::uint32_t v) {
    put16(f, at, static_cast<std::uint16_t>(v >> 16));
    put16(f, at + 2, static_cast<std::uint16_t>(v));
}

std::vector<std::uint8_t> build_frame(const PacketRecord& p, std::uint16_t ip_id, std::uint32_t seq) {
    const bool tcp = p.transport == Transport::TCP;
    const std::size_t l4 = tcp ? 20 : 8;
    std::vector<std::uint8_t> f(14 + 20 + l4 + p.payload.size(), 0);
    // Ethernet: fixed locally administered MACs, IPv4 ethertype.
    const std::uint8_t dst_mac[6] = {0x02, 0, 0, 0, 0, 0x01}, src_mac[6] = {0x02, 0, 0, 0, 0, 0x02};
    std::copy(dst_mac, dst_mac + 6, f.begin());
    std::copy(src_mac, src_mac + 6, f.begin() + 6);
    put16(f, 12, 0x0800);
    const std::size_t ip = 14;
    f[ip] = 0x45;
    put16(f, ip + 2, static_cast<std::uint16_t>(20 + l4 + p.payload.size()));
    put16(f, ip + 4, ip_id);
    put16(f, ip + 6, 0x4000);  // don't fragment
    f[ip + 8] = 64;
    f[ip + 9] = tcp ? 6 : 17;
    std::copy(p.src_addr.bytes.begin(), p.src_addr.bytes.begin() + 4, f.begin() + ip + 12);
    std::copy(p.dst_addr.bytes.begin(), p.dst_addr.bytes.begin() + 4, f.begin() + ip + 16);
    put16(f, ip + 10, ip_checksum(f.data() + ip, 20));
    const std::size_t t = ip + 20;
    put16(f, t, p.src_port);
    put16(f, t + 2, p.dst_port);
    if (tcp) {
        put32(f, t + 4, seq);
        f[t + 12] = 5 << 4;
        f[t + 13] = p.tcp_flags;
        put16(f, t + 14, 65535);
    } else {
        put16(f, t + 4, static_cast<std::uint16_t>(8 + p.payload.size()));
    }
    std::copy(p.payload.begin(), p.payload.end(), f.begin() + static_cast<std::ptrdiff_t>(t + l4));
    return f;
}

SizeRange size_from_json(const nlohmann::json& j) {
    return {j.at("min").get<std::size_t>(), j.at("max").get<std::size_t>(), j.value("weight", 1.0)};
}

ByteModel bytes_from_json(const nlohmann::json& j) {
    ByteModel b;
    const auto kind = j.value("model", std::string("text"));
    if (kind == "text") b.kind = ByteModel::Kind::Text;
    else if (kind == "uniform") b.kind = ByteModel::Kind::Uniform;
    else if (kind == "runs") b.kind = ByteModel::Kind::Runs;
    else throw ConfigError("unknown byte model '" + kind + "'");
    b.run_min = j.value("run_min", b.run_min);
    b.run_max = j.value("run_max", b.run_max);
    return b;
}

MotifSpec motif_from_json(const nlohmann::json& j) {
    MotifSpec m;
    if (j.contains("hex")) {
        m.kind = MotifSpec::Kind::Fixed;
        m.bytes = hex_bytes(j.at("hex").get<std::string>());
    } else if (j.value("kind", std::string()) == "alternating") {
        m.kind = MotifSpec::Kind::Alternating;
        m.length = j.value("length", m.length);
    } else {
        throw ConfigError("motif needs a hex pattern or kind \"alternating\"");
    }
    m.first_packet = j.value("first_packet", m.first_packet);
    m.later_packets = j.value("later_packets", m.later_packets);
    m.window = j.value("window", m.window);
    return m;
}

ClassSpec traffic_class(std::string name, std::size_t flows, std::vector<SizeRange> sizes, ByteModel bytes,
                        std::vector<MotifSpec> motifs) {
    ClassSpec c;
    c.name = std::move(name);
    c.flows = flows;
    c.min_packets = 2;
    c.max_packets = 8;
    c.sizes = std::move(sizes);
    c.bytes = bytes;
    c.motifs = std::move(motifs);
    return c;
}

MotifSpec fixed_motif(const std::string& hex, double first, double later, std::size_t window) {
    MotifSpec m;
    m.kind = MotifSpec::Kind::Fixed;
    m.bytes = hex_bytes(hex);
    m.first_packet = first;
    m.later_packets = later;
    m.window = window;
    return m;
}

}  // namespace

void CorpusSpec::validate() const {
    if (classes.empty()) throw ConfigError("corpus declares no classes");
    if (classes.size() > 255) throw ConfigError("corpus declares too many classes");
    if (!(duration > 0)) throw ConfigError("corpus duration must be positive");
    std::set<std::string> names;
    for (const auto& c : classes) {
        if (c.name.empty() || c.name.find_first_of("\t\n/\\") != std::string::npos) {
            throw ConfigError("invalid class name '" + c.name + "'");
        }
        if (!names.insert(c.name).second) throw ConfigError("duplicate class '" + c.name + "'");
        if (c.flows == 0) throw ConfigError("class '" + c.name + "' has no flows");
        if (c.min_packets == 0 || c.max_packets < c.min_packets) {
            throw ConfigError("class '" + c.name + "' has an invalid packets-per-flow range");
        }
        if (c.sizes.empty()) throw ConfigError("class '" + c.name + "' has no size ranges");
        for (const auto& r : c.sizes) {
            if (r.max < r.min || r.max > 1460 || !(r.weight > 0)) {
                throw ConfigError("class '" + c.name + "' has an invalid size range");
            }
        }
        if (c.bytes.kind == ByteModel::Kind::Runs && (c.bytes.run_min == 0 || c.bytes.run_max < c.bytes.run_min)) {
            throw ConfigError("class '" + c.name + "' has an invalid run-length range");
        }
        for (const auto& m : c.motifs) {
            if (m.size() == 0) throw ConfigError("class '" + c.name + "' has an empty motif");
            if (m.first_packet < 0 || m.first_packet > 1 || m.later_packets < 0 || m.later_packets > 1) {
                throw ConfigError("motif probabilities must lie in [0, 1]");
            }
        }
        if (!(c.mean_iat > 0)) throw ConfigError("mean inter-arrival time must be positive");
        if (c.tcp_share < 0 || c.tcp_share > 1) throw ConfigError("TCP share must lie in [0, 1]");
        if (c.flows > kClients * 60000) throw ConfigError("class '" + c.name + "' has too many flows");
    }
}

CorpusSpec CorpusSpec::from_json(const nlohmann::json& j) {
    try {
        if (j.contains("preset")) {
            CorpusSpec s = preset(j.at("preset").get<std::string>());
            if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
            if (j.contains("flows_per_class")) {
                for (auto& c : s.classes) c.flows = j.at("flows_per_class").get<std::size_t>();
            }
            s.validate();
            return s;
        }
        CorpusSpec s;
        s.name = j.value("name", std::string("custom"));
        s.seed = j.value("seed", s.seed);
        s.duration = j.value("duration", s.duration);
        for (const auto& cj : j.at("classes")) {
            ClassSpec c;
            c.name = cj.at("name").get<std::string>();
            c.flows = cj.at("flows").get<std::size_t>();
            c.min_packets = cj.value("min_packets", c.min_packets);
            c.max_packets = cj.value("max_packets", c.max_packets);
            for (const auto& r : cj.at("sizes")) c.sizes.push_back(size_from_json(r));
            if (cj.contains("bytes")) c.bytes = bytes_from_json(cj.at("bytes"));
            if (cj.contains("motifs")) {
                for (const auto& m : cj.at("motifs")) c.motifs.push_back(motif_from_json(m));
            }
            c.mean_iat = cj.value("mean_iat", c.mean_iat);
            c.tcp_share = cj.value("tcp_share", c.tcp_share);
            s.classes.push_back(std::move(c));
        }
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid corpus spec: ") + e.what());
    }
}

CorpusSpec CorpusSpec::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open corpus spec " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("corpus spec " + path.string() + " is not valid JSON: " + e.what());
    }
}

nlohmann::json CorpusSpec::to_json() const {
    nlohmann::json j{{"name", name}, {"seed", seed}, {"duration", duration}, {"classes", nlohmann::json::array()}};
    for (const auto& c : classes) {
        nlohmann::json cj{{"name", c.name},
                          {"flows", c.flows},
                          {"min_packets", c.min_packets},
                          {"max_packets", c.max_packets},
                          {"mean_iat", c.mean_iat},
                          {"tcp_share", c.tcp_share},
                          {"sizes", nlohmann::json::array()},
                          {"motifs", nlohmann::json::array()}};
        for (const auto& r : c.sizes) cj["sizes"].push_back({{"min", r.min}, {"max", r.max}, {"weight", r.weight}});
        const char* model = c.bytes.kind == ByteModel::Kind::Text      ? "text"
                            : c.bytes.kind == ByteModel::Kind::Uniform ? "uniform"
                                                                       : "runs";
        cj["bytes"] = {{"model", model}, {"run_min", c.bytes.run_min}, {"run_max", c.bytes.run_max}};
        for (const auto& m : c.motifs) {
            nlohmann::json mj{{"first_packet", m.first_packet}, {"later_packets", m.later_packets}, {"window", m.window}};
            if (m.kind == MotifSpec::Kind::Fixed) {
                mj["hex"] = to_hex(m.bytes);
            } else {
                mj["kind"] = "alternating";
                mj["length"] = m.length;
            }
            cj["motifs"].push_back(mj);
        }
        j["classes"].push_back(cj);
    }
    return j;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"separable", "hard", "multiclass4"};
    return names;
}

CorpusSpec CorpusSpec::preset(const std::string& name) {
    CorpusSpec s;
    s.name = name;
    s.seed = 1;
    const ByteModel text{};
    if (name == "separable") {
        // Malware sizes sit in a band the benign mixture avoids; malware
        // payloads also carry a high-byte motif.
        s.classes.push_back(traffic_class("Normal", 2500, {{40, 700, 0.6}, {1300, 1460, 0.4}}, text, {}));
        s.classes.push_back(traffic_class("Malware", 2500, {{800, 1200, 1.0}}, text,
                                          {fixed_motif("8fa3c1e7b49dd2f0a8e6c3b7f19e84da", 1.0, 0.3, 100)}));
    } else if (name == "hard") {
        // Same sizes and byte marginals for both classes; only the local
        // alternating structure of the motif tells malware apart. The motif
        // shows up in some packets only, so a flow holds more evidence.
        const ByteModel runs{ByteModel::Kind::Runs, 8, 24};
        MotifSpec alt;
        alt.kind = MotifSpec::Kind::Alternating;
        alt.length = 8;
        alt.first_packet = 0.7;
        alt.later_packets = 0.7;
        alt.window = 100;
        s.classes.push_back(traffic_class("Normal", 2500, {{200, 1400, 1.0}}, runs, {}));
        s.classes.push_back(traffic_class("Malware", 2500, {{200, 1400, 1.0}}, runs, {alt}));
    } else if (name == "multiclass4") {
        // Neris and Virut share a spam motif; each adds its own marker half
        // of the time. Rbot has a motif of its own.
        const std::vector<SizeRange> sizes{{100, 1400, 1.0}};
        const auto spam = fixed_motif("d4e8c2f6a1b9e3d7c5f0a8b2e6d1c9f4", 1.0, 1.0, 64);
        s.classes.push_back(traffic_class("Normal", 1500, sizes, text, {}));
        s.classes.push_back(traffic_class("Neris", 1500, sizes, text,
                                          {spam, fixed_motif("f1c3e5a7b9d2f4e6a8c0", 0.5, 0.5, 64)}));
        s.classes.push_back(traffic_class("Rbot", 1500, sizes, text,
                                          {fixed_motif("b7e1d9f3c5a2e8d4f6b0c8e2a4d6f1b3", 1.0, 1.0, 64)}));
        s.classes.push_back(traffic_class("Virut", 1500, sizes, text,
                                          {spam, fixed_motif("a9e7c5b3f1d8e6c4a2b0", 0.5, 0.5, 64)}));
    } else {
        throw ConfigError("unknown corpus preset '" + name + "' (expected separable, hard or multiclass4)");
    }
    s.validate();
    return s;
}

std::vector<PacketRecord> synthesize_class(const CorpusSpec& spec, std::size_t class_index,
                                           std::vector<std::vector<std::uint8_t>>* frames) {
    spec.validate();
    const ClassSpec& c = spec.classes.at(class_index);
    Rng rng(derive_seed(spec.seed, "class:" + c.name, class_index));
    std::vector<PacketRecord> packets;
    std::set<std::tuple<std::size_t, std::uint16_t, std::size_t, std::uint16_t, bool>> keys;

    // Every class walks the same client/server schedule, so per-address
    // flow counts inside a capture say nothing about its class.
    Rng hosts(derive_seed(spec.seed, "hosts"));

    for (std::size_t f = 0; f < c.flows; ++f) {
        const bool tcp = rng.bernoulli(c.tcp_share);
        const auto client = static_cast<std::size_t>(hosts.below(kClients));
        const auto server = static_cast<std::size_t>(hosts.below(kServers));
        std::uint16_t cport = 0, sport = 0;
        do {
            cport = static_cast<std::uint16_t>(rng.between(1024, 65535));
            sport = kServerPorts[rng.below(std::size(kServerPorts))];
        } while (!keys.insert({client, cport, server, sport, tcp}).second);
        const Address caddr = Address::ipv4(10, 0, static_cast<std::uint8_t>(client / 250), static_cast<std::uint8_t>(1 + client % 250));
        const Address saddr = Address::ipv4(192, 168, 1, static_cast<std::uint8_t>(1 + server));

        const auto count = static_cast<std::size_t>(
            rng.between(static_cast<std::int64_t>(c.min_packets), static_cast<std::int64_t>(c.max_packets)));
        double t = rng.uniform(0.0, spec.duration);
        for (std::size_t k = 0; k < count; ++k) {
            if (k > 0) t += c.mean_iat > 0 ? rng.exponential(c.mean_iat) : 0.0;
            PacketRecord p;
            p.timestamp.micros = kEpochMicros + static_cast<std::int64_t>(std::llround(t * 1e6));
            const bool forward = k == 0 || rng.bernoulli(0.5);
            p.src_addr = forward ? caddr : saddr;
            p.dst_addr = forward ? saddr : caddr;
            p.src_port = forward ? cport : sport;
            p.dst_port = forward ? sport : cport;
            p.transport = tcp ? Transport::TCP : Transport::UDP;
            if (tcp) {
                p.tcp_flags = capture::tcp_flag::ACK | capture::tcp_flag::PSH;
                if (k == 0) p.tcp_flags = capture::tcp_flag::SYN | capture::tcp_flag::PSH;
                else if (k + 1 == count) p.tcp_flags |= capture::tcp_flag::FIN;
            }
            p.payload.resize(draw_size(c, rng));
            fill_background(p.payload, c.bytes, rng);
            embed_motifs(p.payload, c.motifs, k == 0, rng);
            p.wire_length = static_cast<std::uint32_t>(14 + 20 + (tcp ? 20 : 8) + p.payload.size());
            p.label = static_cast<capture::ClassId>(class_index);
            packets.push_back(std::move(p));
        }
    }
    std::stable_sort(packets.begin(), packets.end(),
                     [](const PacketRecord& a, const PacketRecord& b) { return a.timestamp < b.timestamp; });
    if (frames != nullptr) {
        frames->clear();
        frames->reserve(packets.size());
        std::uint32_t seq = 1;
        for (std::size_t i = 0; i < packets.size(); ++i) {
            frames->push_back(build_frame(packets[i], static_cast<std::uint16_t>(i), seq));
            seq += static_cast<std::uint32_t>(packets[i].payload.size());
        }
    }
    return packets;
}

std::vector<std::size_t> sample_sizes(const ClassSpec& spec, std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::size_t> out(count);
    for (auto& s : out) s = draw_size(spec, rng);
    return out;
}

double size_cdf(const ClassSpec& spec, double x) {
    double total = 0.0, acc = 0.0;
    for (const auto& r : spec.sizes) {
        total += r.weight;
        const double width = static_cast<double>(r.max - r.min + 1);
        const double below = std::clamp(std::floor(x) - static_cast<double>(r.min) + 1.0, 0.0, width);
        acc += r.weight * below / width;
    }
    return acc / total;
}

double ks_distance(std::vector<std::size_t> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) return 0.0;
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size();) {
        const auto v = samples[i];
        const double below = cdf(static_cast<double>(v) - 1.0);
        const double before = static_cast<double>(i) / n;
        while (i < samples.size() && samples[i] == v) ++i;
        const double at = static_cast<double>(i) / n;
        // Both CDFs are step functions on the integers; compare just below
        // and at every observed value.
        d = std::max({d, std::abs(before - below), std::abs(at - cdf(static_cast<double>(v)))});
    }
    return d;
}

GeneratedCorpus generate_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir, unsigned threads) {
    spec.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IngestError("cannot create " + out_dir.string() + ": " + ec.message());

    GeneratedCorpus result;
    result.manifest_path = out_dir / "manifest.tsv";
    result.packets_per_file.assign(spec.classes.size(), 0);
    for (const auto& c : spec.classes) result.manifest.classes.add(c.name);

    parallel_chunks(spec.classes.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            std::vector<std::vector<std::uint8_t>> frames;
            const auto packets = synthesize_class(spec, i, &frames);
            capture::PcapWriter writer(out_dir / (spec.classes[i].name + ".pcap"));
            for (std::size_t k = 0; k < packets.size(); ++k) writer.write(packets[k].timestamp, frames[k]);
            writer.close();
            result.packets_per_file[i] = packets.size();
        }
    });
    for (std::size_t i = 0; i < spec.classes.size(); ++i) {
        result.manifest.entries.push_back(
            {out_dir / (spec.classes[i].name + ".pcap"), static_cast<capture::ClassId>(i)});
    }
    result.manifest.save(result.manifest_path);
    return result;
}

}  // namespace deepmal::synth
