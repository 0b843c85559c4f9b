#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "deepmal/repr/dataset.hpp"
#include "deepmal/util/error.hpp"
#include "deepmal/util/random.hpp"
#include "support/frames.hpp"

using namespace deepmal;
using namespace deepmal::repr;
using deepmal::testing::packet;
using deepmal::testing::TempDir;

TEST(Normalize, ScalesAndPads) {
    const std::vector<std::uint8_t> bytes{0, 255, 128};
    const auto v = normalize_packet(bytes, 4);
    ASSERT_EQ(v.size(), 4u);
    EXPECT_EQ(v[0], 0.0f);
    EXPECT_EQ(v[1], 1.0f);
    EXPECT_FLOAT_EQ(v[2], 128.0f / 255.0f);
    EXPECT_EQ(v[3], 0.0f);
}

TEST(Normalize, TruncatesLongPayloads) {
    std::vector<std::uint8_t> bytes(2000);
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<std::uint8_t>(i % 251);
    const auto v = normalize_packet(bytes, 1024);
    ASSERT_EQ(v.size(), 1024u);
    for (std::size_t i = 0; i < 1024; ++i) EXPECT_FLOAT_EQ(v[i], bytes[i] / 255.0f);
}

TEST(Normalize, EmptyPayloadIsAllZeros) {
    const auto v = normalize_packet({}, 100);
    EXPECT_EQ(v, std::vector<float>(100, 0.0f));
}

namespace {

std::vector<capture::PacketRecord> labeled_packets(std::size_t normal, std::size_t malware) {
    std::vector<capture::PacketRecord> ps;
    for (std::size_t i = 0; i < normal + malware; ++i) {
        auto p = packet(static_cast<double>(i), 1, 1000, 2, 80, 1 + i % 50);
        p.label = i < normal ? 0 : 1;
        ps.push_back(p);
    }
    return ps;
}

const std::vector<std::string> kBinary{"Normal", "Malware"};

}  // namespace

TEST(PacketDataset, BalancingDownsamplesToRarestClass) {
    const auto ps = labeled_packets(300, 100);
    const auto ds = build_packet_dataset(ps, 16, kBinary);
    EXPECT_EQ(ds.size(), 200u);
    EXPECT_EQ(ds.class_counts(), (std::vector<std::size_t>{100, 100}));
    EXPECT_EQ(ds.inputs.shape(), (nn::Shape{200, 16}));
    ds.validate();
}

TEST(PacketDataset, DisabledBalancingKeepsEveryPacket) {
    const auto ps = labeled_packets(300, 100);
    BalancePolicy policy;
    policy.balance = false;
    const auto ds = build_packet_dataset(ps, 16, kBinary, policy);
    EXPECT_EQ(ds.size(), 400u);
    // capture order is preserved
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_FLOAT_EQ(ds.inputs.at(i, 0), 0x41 / 255.0f);
        EXPECT_EQ(ds.labels[i], i < 300 ? 0 : 1);
    }
}

TEST(PacketDataset, CapAndEmptyHandling) {
    auto ps = labeled_packets(300, 100);
    ps[0].payload.clear();
    BalancePolicy policy;
    policy.max_per_class = 40;
    auto ds = build_packet_dataset(ps, 8, kBinary, policy);
    EXPECT_EQ(ds.class_counts(), (std::vector<std::size_t>{40, 40}));

    policy = {};
    policy.balance = false;
    EXPECT_EQ(build_packet_dataset(ps, 8, kBinary, policy).size(), 399u);
    policy.drop_empty = false;
    EXPECT_EQ(build_packet_dataset(ps, 8, kBinary, policy).size(), 400u);
}

TEST(PacketDataset, MissingClassIsAnError) {
    const auto ps = labeled_packets(10, 0);
    EXPECT_THROW(build_packet_dataset(ps, 8, kBinary), DatasetError);
}

TEST(PacketDataset, SameSeedSameSelection) {
    const auto ps = labeled_packets(300, 100);
    BalancePolicy a, b, c;
    a.seed = b.seed = 5;
    c.seed = 6;
    EXPECT_EQ(build_packet_dataset(ps, 8, kBinary, a).inputs, build_packet_dataset(ps, 8, kBinary, b).inputs);
    std::vector<std::uint8_t> labels(400);
    for (std::size_t i = 300; i < 400; ++i) labels[i] = 1;
    EXPECT_NE(select_balanced(labels, 2, a), select_balanced(labels, 2, c));
}

TEST(FlowDataset, PadsShortFlowsAndTruncatesLongOnes) {
    std::vector<capture::PacketRecord> ps{packet(0, 1, 1000, 2, 80, 3)};
    for (int i = 0; i < 5; ++i) ps.push_back(packet(1 + i * 0.1, 3, 2000, 4, 80, static_cast<std::size_t>(10 + i)));
    for (auto& p : ps) p.label = p.src_addr.bytes[3] == 1 ? 0 : 1;
    const auto flows = flow::assemble_flows(ps, 60, 2);
    ASSERT_EQ(flows.size(), 2u);
    BalancePolicy policy;
    policy.balance = false;
    const auto ds = build_flow_dataset(flows, 2, 12, kBinary, policy);
    ASSERT_EQ(ds.inputs.shape(), (nn::Shape{2, 2, 12}));
    // one-packet flow: second slab row stays zero
    for (std::size_t j = 0; j < 12; ++j) EXPECT_EQ(ds.inputs.at(0, 1, j), 0.0f);
    EXPECT_GT(ds.inputs.at(0, 0, 2), 0.0f);
    EXPECT_EQ(ds.inputs.at(0, 0, 3), 0.0f);
    // five-packet flow: only its first two packets (10 and 11 bytes)
    EXPECT_GT(ds.inputs.at(1, 0, 9), 0.0f);
    EXPECT_EQ(ds.inputs.at(1, 0, 10), 0.0f);
    EXPECT_GT(ds.inputs.at(1, 1, 10), 0.0f);
    EXPECT_EQ(ds.inputs.at(1, 1, 11), 0.0f);
    EXPECT_EQ(ds.m, 2u);
    EXPECT_EQ(ds.n, 12u);
}

TEST(Split, EightyTenTen) {
    std::vector<std::uint8_t> labels(100);
    for (std::size_t i = 0; i < 100; ++i) labels[i] = i % 2;
    const auto s = split_indices(labels, 2, SplitSpec{});
    EXPECT_EQ(s.train.size(), 80u);
    EXPECT_EQ(s.validation.size(), 10u);
    EXPECT_EQ(s.test.size(), 10u);
}

TEST(Split, IsAStratifiedDeterministicPartition) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 2 + rng.below(4);
        const std::size_t n = 30 + rng.below(500);
        std::vector<std::uint8_t> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::uint8_t>(i < k ? i : rng.below(k));
        SplitSpec spec;
        spec.seed = trial;
        const auto a = split_indices(labels, k, spec);
        const auto b = split_indices(labels, k, spec);
        EXPECT_EQ(a.train, b.train);
        EXPECT_EQ(a.test, b.test);
        std::vector<std::size_t> all;
        for (const auto* part : {&a.train, &a.validation, &a.test}) {
            EXPECT_TRUE(std::is_sorted(part->begin(), part->end()));
            all.insert(all.end(), part->begin(), part->end());
        }
        std::sort(all.begin(), all.end());
        ASSERT_EQ(all.size(), n);
        for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(all[i], i);
        EXPECT_EQ(a.test.size(), static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n))));
    }
}

TEST(Split, BalancedFourClassSubsetsStayBalanced) {
    std::vector<std::uint8_t> labels(160000);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::uint8_t>(i % 4);
    const auto s = split_indices(labels, 4, SplitSpec{});
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
        std::vector<std::size_t> counts(4);
        for (auto i : *part) ++counts[labels[i]];
        for (auto c : counts) {
            EXPECT_LE(std::abs(static_cast<double>(c) - part->size() / 4.0), 1.0);
        }
    }
}

TEST(Split, RejectsBadFractionsAndEmptySubsets) {
    SplitSpec bad;
    bad.train = 0.9;
    EXPECT_THROW(bad.validate(), ConfigError);
    std::vector<std::uint8_t> labels{0, 1, 0};
    EXPECT_THROW(split_indices(labels, 2, SplitSpec{}), DatasetError);
}

TEST(DatasetIo, SaveLoadRoundTripAndCsv) {
    TempDir dir("repr_io");
    const auto ps = labeled_packets(30, 30);
    const auto ds = build_packet_dataset(ps, 8, kBinary);
    save_dataset(ds, dir / "d.dmds");
    const auto back = load_dataset(dir / "d.dmds");
    EXPECT_EQ(back.kind, ds.kind);
    EXPECT_EQ(back.inputs, ds.inputs);
    EXPECT_EQ(back.labels, ds.labels);
    EXPECT_EQ(back.class_names, ds.class_names);
    EXPECT_EQ(back.n, 8u);

    export_csv(ds, dir / "d.csv");
    std::ifstream in(dir / "d.csv");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    EXPECT_EQ(header.rfind("label,b0,b1", 0), 0u);
    EXPECT_TRUE(first.rfind("Normal,", 0) == 0 || first.rfind("Malware,", 0) == 0);
    EXPECT_EQ(column_names(ds).size(), 8u);
}

TEST(DatasetIo, FlowColumnNamesAndForeignFile) {
    Dataset ds;
    ds.kind = DatasetKind::Flows;
    ds.inputs = nn::Tensor({0, 2, 3});
    ds.m = 2;
    ds.n = 3;
    const auto names = column_names(ds);
    ASSERT_EQ(names.size(), 6u);
    EXPECT_EQ(names[4], "p1_b1");

    TempDir dir("repr_bad");
    {
        std::ofstream out(dir / "x.dmds", std::ios::binary);
        out << "DMCK and more";
    }
    EXPECT_THROW(load_dataset(dir / "x.dmds"), FormatError);
}

TEST(Dataset, ValidateCatchesInconsistencies) {
    Dataset ds;
    ds.kind = DatasetKind::Packets;
    ds.class_names = kBinary;
    ds.inputs = nn::Tensor({2, 4});
    ds.labels = {0, 2};
    EXPECT_THROW(ds.validate(), DatasetError);
    ds.labels = {0};
    EXPECT_THROW(ds.validate(), DatasetError);
}
