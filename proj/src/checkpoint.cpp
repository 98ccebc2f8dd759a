#include "seanav/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace seanav::checkpoint {

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'E', 'A', 'N', 'A', 'V', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw CheckpointError("truncated checkpoint");
    return v;
}

}  // namespace

void save(const std::string& path, const Checkpoint& ck) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, kVersion);
    write_pod(os, static_cast<std::uint32_t>(ck.shapes.size()));
    for (const auto& shape : ck.shapes) {
        write_pod(os, static_cast<std::uint32_t>(shape.size()));
        for (const int d : shape) write_pod(os, static_cast<std::int32_t>(d));
    }
    write_pod(os, static_cast<std::uint64_t>(ck.params.size()));
    os.write(reinterpret_cast<const char*>(ck.params.data()),
             static_cast<std::streamsize>(ck.params.size() * sizeof(double)));
    if (!os) throw CheckpointError("short write: " + path);
    os.close();

    std::ofstream meta(path + ".json", std::ios::trunc);
    if (!meta) throw CheckpointError("cannot open checkpoint sidecar for writing: " + path + ".json");
    meta << ck.meta.dump(2) << '\n';
}

Checkpoint load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw CheckpointError("bad checkpoint magic: " + path);
    }
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck;
    const auto groups = read_pod<std::uint32_t>(is);
    ck.shapes.resize(groups);
    for (auto& shape : ck.shapes) {
        const auto dims = read_pod<std::uint32_t>(is);
        shape.resize(dims);
        for (auto& d : shape) d = read_pod<std::int32_t>(is);
    }
    const auto count = read_pod<std::uint64_t>(is);
    ck.params.resize(count);
    is.read(reinterpret_cast<char*>(ck.params.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw CheckpointError("truncated checkpoint weights: " + path);

    std::ifstream meta(path + ".json");
    if (meta) {
        try {
            meta >> ck.meta;
        } catch (const nlohmann::json::exception& e) {
            throw CheckpointError(std::string("bad checkpoint sidecar: ") + e.what());
        }
    }
    return ck;
}

}  // namespace seanav::checkpoint
