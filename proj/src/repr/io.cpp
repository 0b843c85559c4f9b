#include <cstring>
#include <fstream>

#include "deepmal/repr/dataset.hpp"
#include "deepmal/util/binary_io.hpp"
#include "deepmal/util/error.hpp"

namespace deepmal::repr {
namespace {

constexpr char kMagic[4] = {'D', 'M', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    ds.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IngestError("cannot write " + path.string());
    BinaryWriter w(out);
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u8(static_cast<std::uint8_t>(ds.kind));
    w.u32(static_cast<std::uint32_t>(ds.inputs.rank()));
    for (auto d : ds.inputs.shape()) w.u64(d);
    w.u32(static_cast<std::uint32_t>(ds.class_names.size()));
    for (const auto& c : ds.class_names) w.string(c);
    w.u32(static_cast<std::uint32_t>(ds.feature_names.size()));
    for (const auto& f : ds.feature_names) w.string(f);
    w.u64(ds.n);
    w.u64(ds.m);
    w.pod(ds.idle_timeout);
    w.array(ds.inputs.values());
    w.array(std::span<const std::uint8_t>(ds.labels));
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open dataset " + path.string());
    BinaryReader r(in);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(path.string() + " is not a dataset file");
    if (r.u32() != kVersion) throw FormatError("unsupported dataset version in " + path.string());
    Dataset ds;
    const auto kind = r.u8();
    if (kind > 2) throw FormatError("unknown dataset kind");
    ds.kind = static_cast<DatasetKind>(kind);
    const auto rank = r.u32();
    if (rank < 2 || rank > 3) throw FormatError("implausible dataset rank");
    nn::Shape shape;
    std::size_t total = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        shape.push_back(r.u64());
        if (shape.back() > (std::size_t{1} << 40)) throw FormatError("implausible dataset extent");
        total *= shape.back();
    }
    if (total > (std::size_t{1} << 34)) throw FormatError("implausible dataset size");
    const auto classes = r.u32();
    if (classes == 0 || classes > 256) throw FormatError("implausible class count");
    for (std::uint32_t i = 0; i < classes; ++i) ds.class_names.push_back(r.string(4096));
    const auto features = r.u32();
    if (features > (1u << 20)) throw FormatError("implausible feature count");
    for (std::uint32_t i = 0; i < features; ++i) ds.feature_names.push_back(r.string(4096));
    ds.n = r.u64();
    ds.m = r.u64();
    ds.idle_timeout = r.pod<double>();
    ds.inputs = nn::Tensor(shape, r.array<float>(total));
    ds.labels = r.array<std::uint8_t>(shape[0]);
    try {
        ds.validate();
    } catch (const DatasetError& e) {
        throw FormatError(std::string("corrupt dataset: ") + e.what());
    }
    return ds;
}

std::vector<std::string> column_names(const Dataset& ds) {
    if (ds.kind == DatasetKind::Expert && !ds.feature_names.empty()) return ds.feature_names;
    std::vector<std::string> names;
    if (ds.kind == DatasetKind::Flows) {
        for (std::size_t p = 0; p < ds.inputs.dim(1); ++p) {
            for (std::size_t b = 0; b < ds.inputs.dim(2); ++b) {
                names.push_back("p" + std::to_string(p) + "_b" + std::to_string(b));
            }
        }
    } else {
        const std::string prefix = ds.kind == DatasetKind::Expert ? "f" : "b";
        for (std::size_t b = 0; b < ds.inputs.dim(1); ++b) names.push_back(prefix + std::to_string(b));
    }
    return names;
}

void export_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IngestError("cannot write " + path.string());
    out << "label";
    for (const auto& c : column_names(ds)) out << ',' << c;
    out << '\n';
    char buf[32];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << ds.class_names.at(ds.labels[i]);
        for (float v : ds.inputs.row(i)) {
            std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(v));
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw IngestError("write failed for " + path.string());
}

}  // namespace deepmal::repr
