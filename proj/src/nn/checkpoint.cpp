#include "deepmal/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "deepmal/util/binary_io.hpp"
#include "deepmal/util/error.hpp"

DEEPMAL_NN_BEGIN
namespace {

constexpr char kMagic[4] = {'D', 'M', 'C', 'K'};

Blob tensor_blob(const std::string& name, const Tensor& t) {
    Blob b;
    b.name = name;
    b.dtype = sizeof(Real) == 4 ? Blob::DType::F32 : Blob::DType::F64;
    b.shape.assign(t.shape().begin(), t.shape().end());
    b.values.assign(t.values().begin(), t.values().end());
    return b;
}

void load_tensor(const Blob& b, Tensor& t) {
    Shape shape(b.shape.begin(), b.shape.end());
    if (shape != t.shape()) {
        throw FormatError("checkpoint tensor '" + b.name + "' has shape " + shape_string(shape) +
                          ", model expects " + shape_string(t.shape()));
    }
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<Real>(b.values[i]);
}

}  // namespace

std::size_t Blob::count() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

const Blob& Container::blob(const std::string& name) const {
    for (const auto& b : blobs) {
        if (b.name == name) return b;
    }
    throw FormatError("checkpoint has no tensor '" + name + "'");
}

void Container::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IngestError("cannot write " + path.string());
    BinaryWriter w(out);
    w.bytes(kMagic, 4);
    w.u32(kContainerVersion);
    w.string(header.dump());
    w.u32(static_cast<std::uint32_t>(blobs.size()));
    for (const auto& b : blobs) {
        if (b.values.size() != b.count()) throw ShapeError("blob '" + b.name + "' size mismatch");
        w.string(b.name);
        w.u8(static_cast<std::uint8_t>(b.dtype));
        w.u32(static_cast<std::uint32_t>(b.shape.size()));
        for (auto d : b.shape) w.u64(d);
        switch (b.dtype) {
            case Blob::DType::F32: {
                std::vector<float> v(b.values.begin(), b.values.end());
                w.array(std::span<const float>(v));
                break;
            }
            case Blob::DType::F64:
                w.array(std::span<const double>(b.values));
                break;
            case Blob::DType::I64: {
                std::vector<std::int64_t> v(b.values.size());
                for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::int64_t>(b.values[i]);
                w.array(std::span<const std::int64_t>(v));
                break;
            }
        }
    }
}

Container Container::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open " + path.string());
    BinaryReader r(in);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(path.string() + " is not a checkpoint");
    if (r.u32() != kContainerVersion) throw FormatError("unsupported checkpoint version");
    Container c;
    try {
        c.header = nlohmann::json::parse(r.string());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
    }
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        Blob b;
        b.name = r.string(4096);
        const auto dtype = r.u8();
        if (dtype > 2) throw FormatError("unknown blob dtype");
        b.dtype = static_cast<Blob::DType>(dtype);
        const auto rank = r.u32();
        if (rank > 8) throw FormatError("implausible blob rank");
        for (std::uint32_t d = 0; d < rank; ++d) b.shape.push_back(r.u64());
        const std::size_t n = b.count();
        if (n > (std::size_t{1} << 32)) throw FormatError("implausible blob size");
        switch (b.dtype) {
            case Blob::DType::F32: {
                auto v = r.array<float>(n);
                b.values.assign(v.begin(), v.end());
                break;
            }
            case Blob::DType::F64:
                b.values = r.array<double>(n);
                break;
            case Blob::DType::I64: {
                auto v = r.array<std::int64_t>(n);
                b.values.assign(v.begin(), v.end());
                break;
            }
        }
        c.blobs.push_back(std::move(b));
    }
    return c;
}

nlohmann::json to_json(const History& history) {
    auto j = nlohmann::json::array();
    for (const auto& e : history) {
        j.push_back({{"epoch", e.epoch},
                     {"train_loss", e.train_loss},
                     {"train_acc", e.train_acc},
                     {"val_loss", e.val_loss},
                     {"val_acc", e.val_acc}});
    }
    return j;
}

History history_from_json(const nlohmann::json& j) {
    History h;
    for (const auto& e : j) {
        h.push_back({e.at("epoch").get<std::size_t>(), e.at("train_loss").get<double>(),
                     e.at("train_acc").get<double>(), e.at("val_loss").get<double>(),
                     e.at("val_acc").get<double>()});
    }
    return h;
}

void store_network(Network& net, Container& out) {
    out.header["kind"] = "network";
    out.header["model"] = to_json(net.config());
    out.header["seed"] = net.seed();
    for (const auto& p : net.params()) out.blobs.push_back(tensor_blob(p.name, *p.value));
    for (const auto& s : net.state()) out.blobs.push_back(tensor_blob(s.name, *s.value));
}

Network restore_network(const Container& in) {
    if (in.header.value("kind", std::string()) != "network") {
        throw FormatError("checkpoint does not hold a network");
    }
    Network net(model_config_from_json(in.header.at("model")), in.header.at("seed").get<std::uint64_t>());
    for (const auto& p : net.params()) load_tensor(in.blob(p.name), *p.value);
    for (const auto& s : net.state()) load_tensor(in.blob(s.name), *s.value);
    return net;
}

DEEPMAL_NN_END
