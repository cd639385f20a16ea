#include "fusevid/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "fusevid/errors.hpp"

namespace fusevid {

namespace {

constexpr std::uint8_t kMagic[4] = {'M', 'T', 'F', '1'};

void store_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint64_t load_u64_le(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

void store_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint32_t load_u32_le(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

[[noreturn]] void fail(const std::string& what, std::size_t offset) {
    throw FormatError("tensor file: " + what + " at byte " + std::to_string(offset));
}

}  // namespace

std::vector<std::uint8_t> tensor_to_bytes(const Tensor& t) {
    std::vector<std::uint8_t> out;
    const auto& shape = t.shape();
    out.reserve(8 + shape.size() * 8 + t.numel() * dtype_size(t.dtype()));
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(t.dtype() == DType::f32 ? 0 : 1);
    if (shape.size() > 255) throw FormatError("tensor file: rank exceeds 255");
    out.push_back(static_cast<std::uint8_t>(shape.size()));
    out.push_back(0);
    out.push_back(0);
    for (auto e : shape) store_u64_le(out, e);
    if (t.dtype() == DType::f32) {
        for (float v : t.data<float>()) store_u32_le(out, std::bit_cast<std::uint32_t>(v));
    } else {
        for (double v : t.data<double>()) store_u64_le(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

Tensor tensor_from_bytes(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8) fail("truncated header", bytes.size());
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) fail("bad magic", 0);
    const std::uint8_t dtype_code = bytes[4];
    if (dtype_code > 1) fail("unknown dtype code " + std::to_string(dtype_code), 4);
    const DType dt = dtype_code == 0 ? DType::f32 : DType::f64;
    const std::size_t rank = bytes[5];
    if (bytes[6] != 0 || bytes[7] != 0) fail("reserved bytes not zero", 6);

    std::size_t off = 8;
    if (bytes.size() < off + rank * 8) fail("truncated extents", bytes.size());
    std::vector<std::size_t> shape(rank);
    std::size_t numel = 1;
    for (std::size_t d = 0; d < rank; ++d) {
        const std::uint64_t e = load_u64_le(bytes.data() + off);
        shape[d] = static_cast<std::size_t>(e);
        numel *= shape[d];
        off += 8;
    }

    const std::size_t payload = numel * dtype_size(dt);
    if (bytes.size() < off + payload) fail("truncated payload", bytes.size());
    if (bytes.size() > off + payload) fail("trailing bytes", off + payload);

    Tensor t = Tensor::zeros(shape, dt);
    if (dt == DType::f32) {
        auto d = t.data<float>();
        for (std::size_t i = 0; i < numel; ++i)
            d[i] = std::bit_cast<float>(load_u32_le(bytes.data() + off + i * 4));
    } else {
        auto d = t.data<double>();
        for (std::size_t i = 0; i < numel; ++i)
            d[i] = std::bit_cast<double>(load_u64_le(bytes.data() + off + i * 8));
    }
    return t;
}

void write_tensor(const std::string& path, const Tensor& t) {
    const auto bytes = tensor_to_bytes(t);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("tensor file: cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw FormatError("tensor file: write failed: " + path);
}

Tensor read_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw FormatError("tensor file: cannot open: " + path);
    const auto size = static_cast<std::size_t>(f.tellg());
    f.seekg(0);
    std::vector<std::uint8_t> bytes(size);
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
    if (!f) throw FormatError("tensor file: read failed: " + path);
    return tensor_from_bytes(bytes);
}

}  // namespace fusevid
