#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace onenet {

using i64 = std::int64_t;
using u64 = std::uint64_t;

// Error taxonomy. CLI exit codes map call sites, not types.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : Error {          // dimension mismatch between operands
    using Error::Error;
};
struct GeometryError : Error {       // indivisible extents, empty conv output
    using Error::Error;
};
struct ContractError : Error {       // API misuse (non-scalar backward, bad domain)
    using Error::Error;
};
struct DataError : Error {           // bad labels, non-finite loss, unusable dataset
    using Error::Error;
};
struct FormatError : Error {         // unparseable OTSR/ONWT/PNM bytes
    using Error::Error;
};
struct ConfigError : Error {         // unknown keys, invalid config values
    using Error::Error;
};
struct IntegrityError : Error {      // config-hash mismatch, tampered archive
    using Error::Error;
};

inline i64 numel_of(const std::vector<i64>& shape) {
    i64 n = 1;
    for (i64 e : shape) n *= e;
    return n;
}

inline std::string shape_str(const std::vector<i64>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

inline u64 fnv1a64(const void* bytes, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    u64 h = 14695981039346656037ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline u64 fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace onenet
