#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "deepmal/features/expert.hpp"
#include "deepmal/util/error.hpp"
#include "support/frames.hpp"

using namespace deepmal;
using namespace deepmal::features;
using deepmal::testing::packet;

namespace {

std::size_t slot(const std::string& name) {
    const auto& names = feature_names();
    const auto it = std::find(names.begin(), names.end(), name);
    EXPECT_NE(it, names.end()) << name;
    return static_cast<std::size_t>(it - names.begin());
}

flow::FlowRecord single_flow(std::vector<capture::PacketRecord> ps) {
    auto flows = flow::assemble_flows(ps, 600, flow::kKeepAllPackets);
    EXPECT_EQ(flows.size(), 1u);
    return flows.at(0);
}

}  // namespace

TEST(ExpertFeatures, NamesAreUniqueAndCounted) {
    const auto& names = feature_names();
    EXPECT_EQ(names.size(), kFeatureCount);
    EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), names.size());
}

TEST(ExpertFeatures, TwoPacketArithmetic) {
    auto a = packet(10.0, 1, 50000, 2, 80, 46);
    auto b = packet(11.0, 1, 50000, 2, 80, 246);
    a.wire_length = 100;
    b.wire_length = 300;
    const auto v = extract_expert_features(single_flow({a, b}));
    ASSERT_EQ(v.size(), kFeatureCount);
    EXPECT_DOUBLE_EQ(v[slot("pkt_size_avg")], 200.0);
    EXPECT_DOUBLE_EQ(v[slot("pkt_size_min")], 100.0);
    EXPECT_DOUBLE_EQ(v[slot("pkt_size_max")], 300.0);
    EXPECT_NEAR(v[slot("duration")], 1.0, 1e-9);
    EXPECT_NEAR(v[slot("throughput_bps")], 400.0, 1e-6);
    EXPECT_DOUBLE_EQ(v[slot("packets")], 2.0);
    EXPECT_DOUBLE_EQ(v[slot("packets_bwd")], 0.0);
    EXPECT_DOUBLE_EQ(v[slot("fwd_byte_ratio")], 1.0);
    EXPECT_NEAR(v[slot("iat_avg")], 1.0, 1e-9);
    EXPECT_DOUBLE_EQ(v[slot("iat_bwd_max")], 0.0);
    EXPECT_DOUBLE_EQ(v[slot("proto_tcp")], 1.0);
    EXPECT_DOUBLE_EQ(v[slot("dst_port_wellknown")], 1.0);
    EXPECT_DOUBLE_EQ(v[slot("src_port_ephemeral")], 1.0);
}

TEST(ExpertFeatures, PercentileUsesLinearInterpolation) {
    std::vector<double> xs(100);
    for (std::size_t i = 0; i < 100; ++i) xs[i] = static_cast<double>(i + 1);
    EXPECT_DOUBLE_EQ(percentile(xs, 50), 50.5);
    EXPECT_DOUBLE_EQ(percentile(xs, 0), 1.0);
    EXPECT_DOUBLE_EQ(percentile(xs, 100), 100.0);
    EXPECT_NEAR(percentile(xs, 99), 99.01, 1e-12);
    EXPECT_EQ(percentile({}, 50), 0.0);
}

TEST(ExpertFeatures, UdpFlowHasNoTcpFlagShares) {
    auto a = packet(0, 1, 5000, 2, 53, 30, capture::Transport::UDP);
    auto b = packet(0.2, 2, 53, 1, 5000, 90, capture::Transport::UDP);
    const auto v = extract_expert_features(single_flow({a, b}));
    for (const char* f : {"syn_share", "ack_share", "fin_share", "rst_share", "psh_share", "urg_share"}) {
        EXPECT_EQ(v[slot(f)], 0.0) << f;
    }
    EXPECT_DOUBLE_EQ(v[slot("proto_udp")], 1.0);
    EXPECT_DOUBLE_EQ(v[slot("packets_bwd")], 1.0);
}

TEST(ExpertFeatures, FlagSharesCountPackets) {
    auto a = packet(0, 1, 5000, 2, 80);
    auto b = packet(0.1, 2, 80, 1, 5000);
    auto c = packet(0.2, 1, 5000, 2, 80);
    a.tcp_flags = capture::tcp_flag::SYN;
    b.tcp_flags = capture::tcp_flag::SYN | capture::tcp_flag::ACK;
    c.tcp_flags = capture::tcp_flag::ACK | capture::tcp_flag::FIN;
    const auto v = extract_expert_features(single_flow({a, b, c}));
    EXPECT_NEAR(v[slot("syn_share")], 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(v[slot("ack_share")], 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(v[slot("fin_share")], 1.0 / 3.0, 1e-12);
}

TEST(ExpertFeatures, SinglePacketFlowIsFinite) {
    const auto v = extract_expert_features(single_flow({packet(3, 1, 1, 2, 2, 0)}));
    for (double x : v) EXPECT_TRUE(std::isfinite(x));
    EXPECT_DOUBLE_EQ(v[slot("empty_payload_share")], 1.0);
}

TEST(ExpertFeatures, ContextsCountAddressReuse) {
    std::vector<capture::PacketRecord> ps{packet(0, 1, 1000, 9, 80), packet(1, 1, 1001, 9, 80),
                                          packet(2, 2, 1000, 9, 443)};
    const auto flows = flow::assemble_flows(ps, 60, flow::kKeepAllPackets);
    const auto ctx = flow_contexts(flows);
    ASSERT_EQ(ctx.size(), 3u);
    EXPECT_EQ(ctx[0].initiator_addr_flows, 2u);
    EXPECT_EQ(ctx[2].initiator_addr_flows, 1u);
    EXPECT_EQ(ctx[2].responder_addr_flows, 3u);
}

TEST(ExpertFeatures, DatasetShapeAndContextMismatch) {
    std::vector<capture::PacketRecord> ps;
    for (int i = 0; i < 6; ++i) {
        auto p = packet(i * 100.0, static_cast<std::uint8_t>(1 + i), 1000, 9, 80);
        p.label = i % 2;
        ps.push_back(p);
    }
    const auto flows = flow::assemble_flows(ps, 60, flow::kKeepAllPackets);
    const auto ds = build_expert_dataset(flows, {"Normal", "Malware"});
    EXPECT_EQ(ds.kind, repr::DatasetKind::Expert);
    EXPECT_EQ(ds.inputs.shape(), (nn::Shape{6, kFeatureCount}));
    EXPECT_EQ(ds.feature_names.size(), kFeatureCount);
    const std::vector<FlowContext> wrong(2);
    EXPECT_THROW(build_expert_dataset(flows, {"Normal", "Malware"}, {}, wrong), DatasetError);
}
