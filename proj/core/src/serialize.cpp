#include "hpm/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "hpm/errors.hpp"

namespace hpm {
namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor container assumes a little-endian host");

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) {
        throw DataError("tensor container: truncated header");
    }
    return v;
}

}  // namespace

void save_tensor(std::ostream& out, const Tensor& t) {
    out.write(kTensorMagic, 4);
    const unsigned char version = kTensorVersion;
    const unsigned char rank = static_cast<unsigned char>(t.rank());
    out.write(reinterpret_cast<const char*>(&version), 1);
    out.write(reinterpret_cast<const char*>(&rank), 1);
    for (int a = 0; a < t.rank(); ++a) {
        write_u32(out, static_cast<std::uint32_t>(t.extent(a)));
    }
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!out) {
        throw DataError("tensor container: write failed");
    }
}

Tensor load_tensor(std::istream& in) {
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kTensorMagic, 4) != 0) {
        throw DataError("tensor container: bad magic bytes");
    }
    unsigned char version = 0;
    unsigned char rank = 0;
    in.read(reinterpret_cast<char*>(&version), 1);
    in.read(reinterpret_cast<char*>(&rank), 1);
    if (!in || version != kTensorVersion) {
        throw DataError("tensor container: unsupported version");
    }
    if (rank < 1 || rank > 4) {
        throw DataError("tensor container: invalid rank");
    }
    Shape shape(rank);
    std::size_t count = 1;
    for (auto& e : shape) {
        const std::uint32_t v = read_u32(in);
        if (v == 0) {
            throw DataError("tensor container: zero extent");
        }
        e = static_cast<int>(v);
        count *= v;
    }
    std::vector<float> data(count);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) {
        throw DataError("tensor container: truncated payload");
    }
    return Tensor(std::move(shape), std::move(data));
}

void save_tensor_file(const std::filesystem::path& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open for writing: " + path.string());
    }
    save_tensor(out, t);
}

Tensor load_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open: " + path.string());
    }
    return load_tensor(in);
}

}  // namespace hpm
