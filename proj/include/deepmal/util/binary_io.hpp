#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "deepmal/util/error.hpp"

namespace deepmal {

static_assert(std::endian::native == std::endian::little,
              "binary containers are written in host order; big-endian hosts unsupported");

/// Little-endian writer for the toolkit's binary containers.
class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    void bytes(const void* data, std::size_t size) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        if (!out_) throw IngestError("write failed");
    }
    template <typename T>
    void pod(T value) {
        bytes(&value, sizeof(T));
    }
    void u8(std::uint8_t v) { pod(v); }
    void u32(std::uint32_t v) { pod(v); }
    void u64(std::uint64_t v) { pod(v); }
    void string(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    template <typename T>
    void array(std::span<const T> values) {
        bytes(values.data(), values.size_bytes());
    }

private:
    std::ostream& out_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::istream& in) : in_(in) {}

    void bytes(void* data, std::size_t size) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
        if (static_cast<std::size_t>(in_.gcount()) != size) {
            throw FormatError("unexpected end of container");
        }
    }
    template <typename T>
    T pod() {
        T value;
        bytes(&value, sizeof(T));
        return value;
    }
    std::uint8_t u8() { return pod<std::uint8_t>(); }
    std::uint32_t u32() { return pod<std::uint32_t>(); }
    std::uint64_t u64() { return pod<std::uint64_t>(); }
    std::string string(std::size_t limit = 1u << 30) {
        const auto size = u32();
        if (size > limit) throw FormatError("string field too large");
        std::string s(size, '\0');
        bytes(s.data(), size);
        return s;
    }
    template <typename T>
    std::vector<T> array(std::size_t count) {
        std::vector<T> values(count);
        bytes(values.data(), count * sizeof(T));
        return values;
    }

private:
    std::istream& in_;
};

}  // namespace deepmal
