#pragma once

#include <fstream>
#include <sstream>

#include "onenet/model.hpp"
#include "onenet/otsr.hpp"

namespace onenet {

// ONWT weight archive: magic "ONWT\x01", u32 entry count (LE), u64 FNV-1a
// config hash (LE), then the entry table (u16 path length, path bytes,
// u64 payload offset, u64 payload length), then OTSR payloads. Offsets are
// absolute. Batch-norm running statistics ride along as ordinary entries so
// a load reproduces eval-mode forwards bit for bit.

namespace onwt {
inline constexpr char kMagic[5] = {'O', 'N', 'W', 'T', '\x01'};
}

template <class T>
struct WeightStore {
    u64 config_hash = 0;
    std::vector<std::pair<std::string, Tensor<T>>> entries;
};

namespace detail_onwt {

template <class V>
void write_le(std::ostream& os, V v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <class V>
V read_le(std::istream& is) {
    V v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!is) throw FormatError("ONWT: truncated header");
    return v;
}

}  // namespace detail_onwt

template <class T>
void save_weight_store(const WeightStore<T>& store, const std::string& path) {
    using namespace detail_onwt;
    std::vector<std::string> blobs;
    blobs.reserve(store.entries.size());
    for (const auto& [name, tensor] : store.entries) {
        std::ostringstream os(std::ios::binary);
        otsr::write(os, tensor);
        blobs.push_back(os.str());
    }
    u64 offset = 5 + 4 + 8;
    for (const auto& [name, tensor] : store.entries) offset += 2 + name.size() + 16;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("ONWT: cannot open " + path + " for writing");
    f.write(onwt::kMagic, 5);
    write_le<std::uint32_t>(f, static_cast<std::uint32_t>(store.entries.size()));
    write_le<u64>(f, store.config_hash);
    for (std::size_t i = 0; i < store.entries.size(); ++i) {
        const auto& name = store.entries[i].first;
        if (name.size() > 0xffff) throw FormatError("ONWT: path too long");
        write_le<std::uint16_t>(f, static_cast<std::uint16_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_le<u64>(f, offset);
        write_le<u64>(f, blobs[i].size());
        offset += blobs[i].size();
    }
    for (const auto& blob : blobs)
        f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!f) throw FormatError("ONWT: write failed");
}

template <class T>
WeightStore<T> load_weight_store(const std::string& path) {
    using namespace detail_onwt;
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("ONWT: cannot open " + path);
    std::ostringstream buf(std::ios::binary);
    buf << f.rdbuf();
    const std::string bytes = buf.str();
    if (bytes.size() < 17 || std::memcmp(bytes.data(), onwt::kMagic, 5) != 0)
        throw FormatError("ONWT: bad magic or version in " + path);
    std::istringstream is(bytes, std::ios::binary);
    is.seekg(5);
    const auto count = read_le<std::uint32_t>(is);
    WeightStore<T> store;
    store.config_hash = read_le<u64>(is);
    struct RawEntry {
        std::string name;
        u64 offset, length;
    };
    std::vector<RawEntry> raw;
    raw.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = read_le<std::uint16_t>(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        const u64 off = read_le<u64>(is);
        const u64 sz = read_le<u64>(is);
        if (!is || off + sz > bytes.size() || off < 17)
            throw IntegrityError("ONWT: entry '" + name + "' points outside the archive");
        raw.push_back({std::move(name), off, sz});
    }
    for (auto& e : raw) {
        std::istringstream ps(bytes.substr(e.offset, e.length), std::ios::binary);
        try {
            store.entries.emplace_back(e.name, otsr::read<T>(ps));
        } catch (const FormatError& err) {
            throw IntegrityError("ONWT: entry '" + e.name + "': " + err.what());
        }
    }
    return store;
}

template <class T>
WeightStore<T> snapshot_weights(Network<T>& net) {
    WeightStore<T> store;
    store.config_hash = net.cfg.hash();
    for (auto& [name, tensor] : net.params())
        store.entries.emplace_back(name, Tensor<T>(tensor.shape(), tensor.vec()));
    for (auto& [name, buf] : net.stat_buffers())
        store.entries.emplace_back(name, Tensor<T>({static_cast<i64>(buf->size())}, *buf));
    return store;
}

template <class T>
void restore_weights(Network<T>& net, const WeightStore<T>& store, bool check_hash = true) {
    if (check_hash && store.config_hash != net.cfg.hash())
        throw IntegrityError("weight archive was produced by a different model config (hash " +
                             std::to_string(store.config_hash) + " vs " +
                             std::to_string(net.cfg.hash()) + ")");
    std::map<std::string, const Tensor<T>*> index;
    for (const auto& [name, tensor] : store.entries) index[name] = &tensor;
    std::size_t used = 0;
    for (auto& [name, tensor] : net.params()) {
        auto it = index.find(name);
        if (it == index.end()) throw IntegrityError("weight archive is missing entry " + name);
        if (it->second->shape() != tensor.shape())
            throw IntegrityError("entry " + name + " has shape " +
                                 shape_str(it->second->shape()) + ", expected " +
                                 shape_str(tensor.shape()));
        tensor.vec() = it->second->vec();
        ++used;
    }
    for (auto& [name, buf] : net.stat_buffers()) {
        auto it = index.find(name);
        if (it == index.end()) throw IntegrityError("weight archive is missing entry " + name);
        if (it->second->vec().size() != buf->size())
            throw IntegrityError("entry " + name + " has wrong extent");
        *buf = it->second->vec();
        ++used;
    }
    if (used != store.entries.size())
        throw IntegrityError("weight archive carries " +
                             std::to_string(store.entries.size() - used) + " unknown entries");
}

template <class T>
void save_network_weights(Network<T>& net, const std::string& path) {
    save_weight_store(snapshot_weights(net), path);
}

template <class T>
void load_network_weights(Network<T>& net, const std::string& path) {
    restore_weights(net, load_weight_store<T>(path));
}

}  // namespace onenet
