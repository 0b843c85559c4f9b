#include "deepmal/features/expert.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "deepmal/util/error.hpp"

namespace deepmal::features {
namespace {

using capture::PacketRecord;
using capture::Transport;

const char* const kFamilies[kFamilyCount] = {"pkt_size", "pkt_size_fwd", "pkt_size_bwd", "payload_size",
                                             "iat",      "iat_fwd",      "iat_bwd"};

const char* const kScalars[kScalarCount] = {
    "duration",        "throughput_bps",    "packets_per_s",    "packets",
    "packets_fwd",     "packets_bwd",       "bytes",            "bytes_fwd",
    "bytes_bwd",       "payload_bytes",     "empty_payload_share", "fwd_byte_ratio",
    "proto_tcp",       "proto_udp",         "proto_other",      "syn_share",
    "ack_share",       "fin_share",         "rst_share",        "psh_share",
    "urg_share",       "src_port_wellknown", "src_port_registered", "src_port_ephemeral",
    "dst_port_wellknown", "dst_port_registered", "dst_port_ephemeral", "src_addr_flows",
    "dst_addr_flows"};

void append_family(std::vector<double>& out, std::vector<double> values) {
    if (values.empty()) {
        out.insert(out.end(), kStatsPerFamily, 0.0);
        return;
    }
    std::sort(values.begin(), values.end());
    for (double p : kPercentiles) out.push_back(percentile(values, p));
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    out.push_back(values.front());
    out.push_back(mean);
    out.push_back(values.back());
    out.push_back(std::sqrt(var / n));
}

std::vector<double> gaps(const std::vector<double>& times) {
    std::vector<double> out;
    for (std::size_t i = 1; i < times.size(); ++i) out.push_back(times[i] - times[i - 1]);
    return out;
}

void append_port(std::vector<double>& out, std::uint16_t port, bool has_ports) {
    out.push_back(has_ports && port < 1024 ? 1.0 : 0.0);
    out.push_back(has_ports && port >= 1024 && port < 49152 ? 1.0 : 0.0);
    out.push_back(has_ports && port >= 49152 ? 1.0 : 0.0);
}

}  // namespace

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const char* family : kFamilies) {
            for (double p : kPercentiles) n.push_back(std::string(family) + "_p" + std::to_string(static_cast<int>(p)));
            for (const char* s : {"min", "avg", "max", "std"}) n.push_back(std::string(family) + "_" + s);
        }
        for (const char* s : kScalars) n.emplace_back(s);
        return n;
    }();
    return names;
}

double percentile(std::span<const double> sorted, double p) {
    if (sorted.empty()) return 0.0;
    const double rank = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - static_cast<double>(lo));
}

std::vector<double> extract_expert_features(const flow::FlowRecord& flow, const FlowContext& ctx) {
    if (flow.packets.empty()) throw DatasetError("expert features need at least one packet");
    std::vector<double> size_all, size_fwd, size_bwd, payload, t_all, t_fwd, t_bwd;
    double bytes_fwd = 0, bytes_bwd = 0, payload_total = 0;
    std::size_t empty = 0;
    std::size_t flags[6] = {};
    const std::uint8_t flag_bits[6] = {capture::tcp_flag::SYN, capture::tcp_flag::ACK,
                                       capture::tcp_flag::FIN, capture::tcp_flag::RST,
                                       capture::tcp_flag::PSH, capture::tcp_flag::URG};
    for (const PacketRecord& p : flow.packets) {
        const double size = static_cast<double>(p.wire_length);
        const double t = p.timestamp.seconds();
        size_all.push_back(size);
        t_all.push_back(t);
        payload.push_back(static_cast<double>(p.payload.size()));
        payload_total += static_cast<double>(p.payload.size());
        empty += p.payload.empty();
        if (flow.is_forward(p)) {
            size_fwd.push_back(size);
            t_fwd.push_back(t);
            bytes_fwd += size;
        } else {
            size_bwd.push_back(size);
            t_bwd.push_back(t);
            bytes_bwd += size;
        }
        if (p.transport == Transport::TCP) {
            for (int k = 0; k < 6; ++k) flags[k] += (p.tcp_flags & flag_bits[k]) != 0;
        }
    }

    std::vector<double> out;
    out.reserve(kFeatureCount);
    append_family(out, size_all);
    append_family(out, size_fwd);
    append_family(out, size_bwd);
    append_family(out, payload);
    append_family(out, gaps(t_all));
    append_family(out, gaps(t_fwd));
    append_family(out, gaps(t_bwd));

    const double count = static_cast<double>(flow.packets.size());
    const double duration = t_all.back() - t_all.front();
    const double span_s = std::max(duration, 1e-6);
    const double bytes = bytes_fwd + bytes_bwd;
    out.push_back(duration);
    out.push_back(bytes / span_s);
    out.push_back(count / span_s);
    out.push_back(count);
    out.push_back(static_cast<double>(size_fwd.size()));
    out.push_back(static_cast<double>(size_bwd.size()));
    out.push_back(bytes);
    out.push_back(bytes_fwd);
    out.push_back(bytes_bwd);
    out.push_back(payload_total);
    out.push_back(static_cast<double>(empty) / count);
    out.push_back(bytes > 0 ? bytes_fwd / bytes : 0.0);
    const auto transport = flow.key.transport;
    out.push_back(transport == Transport::TCP ? 1.0 : 0.0);
    out.push_back(transport == Transport::UDP ? 1.0 : 0.0);
    out.push_back(transport == Transport::OTHER ? 1.0 : 0.0);
    for (auto f : flags) out.push_back(static_cast<double>(f) / count);

    const bool has_ports = transport != Transport::OTHER;
    const auto& responder = flow.key.lo == flow.initiator ? flow.key.hi : flow.key.lo;
    append_port(out, flow.initiator.port, has_ports);
    append_port(out, responder.port, has_ports);
    out.push_back(static_cast<double>(ctx.initiator_addr_flows));
    out.push_back(static_cast<double>(ctx.responder_addr_flows));
    return out;
}

std::vector<FlowContext> flow_contexts(std::span<const flow::FlowRecord> flows) {
    std::map<capture::Address, std::size_t> opened, answered;
    auto responder_of = [](const flow::FlowRecord& f) {
        return f.key.lo == f.initiator ? f.key.hi.addr : f.key.lo.addr;
    };
    for (const auto& f : flows) {
        ++opened[f.initiator.addr];
        ++answered[responder_of(f)];
    }
    std::vector<FlowContext> out;
    out.reserve(flows.size());
    for (const auto& f : flows) out.push_back({opened[f.initiator.addr], answered[responder_of(f)]});
    return out;
}

repr::Dataset build_expert_dataset(std::span<const flow::FlowRecord> flows,
                                   const std::vector<std::string>& class_names,
                                   const repr::BalancePolicy& policy,
                                   std::span<const FlowContext> given) {
    if (!given.empty() && given.size() != flows.size()) {
        throw DatasetError("flow contexts do not match the flow list");
    }
    if (class_names.empty()) throw DatasetError("no classes declared");
    std::vector<std::size_t> source;
    std::vector<std::uint8_t> labels;
    for (std::size_t i = 0; i < flows.size(); ++i) {
        if (flows[i].packets.empty()) continue;
        if (policy.drop_empty && !flow::has_payload(flows[i])) continue;
        source.push_back(i);
        labels.push_back(static_cast<std::uint8_t>(flows[i].label));
    }
    const auto keep = repr::select_balanced(labels, class_names.size(), policy);
    const auto computed = given.empty() ? flow_contexts(flows) : std::vector<FlowContext>{};
    const auto contexts = given.empty() ? std::span<const FlowContext>(computed) : given;

    repr::Dataset ds;
    ds.kind = repr::DatasetKind::Expert;
    ds.class_names = class_names;
    ds.feature_names = feature_names();
    ds.inputs = nn::Tensor({keep.size(), kFeatureCount});
    for (std::size_t r = 0; r < keep.size(); ++r) {
        const auto i = source[keep[r]];
        const auto v = extract_expert_features(flows[i], contexts[i]);
        auto row = ds.inputs.row(r);
        for (std::size_t k = 0; k < kFeatureCount; ++k) row[k] = static_cast<float>(v[k]);
        ds.labels.push_back(labels[keep[r]]);
    }
    return ds;
}

}  // namespace deepmal::features
