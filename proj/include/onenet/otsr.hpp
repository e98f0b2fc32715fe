#pragma once

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "onenet/tensor.hpp"

namespace onenet {

// OTSR tensor container: magic "OTSR\x01", 1 byte dtype (0 = f32, 1 = f64),
// 1 byte rank, rank x u64 little-endian extents, raw little-endian row-major
// payload. Little-endian host assumed.

namespace otsr {

inline constexpr char kMagic[5] = {'O', 'T', 'S', 'R', '\x01'};

template <class T>
constexpr unsigned char dtype_code() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                  "OTSR supports f32 and f64 tensors");
    return std::is_same_v<T, float> ? 0 : 1;
}

template <class T>
void write(std::ostream& os, const Tensor<T>& t) {
    os.write(kMagic, 5);
    const unsigned char dtype = dtype_code<T>();
    const unsigned char rank = static_cast<unsigned char>(t.rank());
    os.put(static_cast<char>(dtype));
    os.put(static_cast<char>(rank));
    for (i64 e : t.shape()) {
        u64 v = static_cast<u64>(e);
        os.write(reinterpret_cast<const char*>(&v), 8);
    }
    os.write(reinterpret_cast<const char*>(t.vec().data()),
             static_cast<std::streamsize>(t.vec().size() * sizeof(T)));
    if (!os) throw FormatError("OTSR: write failed");
}

template <class T>
Tensor<T> read(std::istream& is) {
    char magic[5];
    is.read(magic, 5);
    if (!is || std::memcmp(magic, kMagic, 5) != 0)
        throw FormatError("OTSR: bad magic or version");
    const int dtype = is.get();
    const int rank = is.get();
    if (dtype != dtype_code<T>())
        throw FormatError("OTSR: dtype code " + std::to_string(dtype) +
                          " does not match requested element type");
    if (rank < 1) throw FormatError("OTSR: bad rank");
    std::vector<i64> shape(static_cast<std::size_t>(rank));
    for (auto& e : shape) {
        u64 v = 0;
        is.read(reinterpret_cast<char*>(&v), 8);
        if (!is || v == 0) throw FormatError("OTSR: bad extent");
        e = static_cast<i64>(v);
    }
    std::vector<T> data(static_cast<std::size_t>(numel_of(shape)));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(T)));
    if (!is) throw FormatError("OTSR: truncated payload");
    return Tensor<T>(std::move(shape), std::move(data));
}

template <class T>
void save_file(const std::string& path, const Tensor<T>& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("OTSR: cannot open " + path + " for writing");
    write(f, t);
}

template <class T>
Tensor<T> load_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("OTSR: cannot open " + path);
    return read<T>(f);
}

}  // namespace otsr
}  // namespace onenet
