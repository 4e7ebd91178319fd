#include "cupgan/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "cupgan/errors.hpp"

namespace cupgan::checkpoint {

namespace {

constexpr char kMagic[8] = {'C', 'U', 'P', 'G', 'A', 'N', 'A', 'R'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw CheckpointError("checkpoint: truncated archive");
    return v;
}

std::string read_string(std::istream& is, std::uint32_t len) {
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is) throw CheckpointError("checkpoint: truncated archive");
    return s;
}

}  // namespace

const Tensor* Archive::find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return &t;
    }
    return nullptr;
}

void write_archive(const std::string& path, const Archive& archive) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw CheckpointError("checkpoint: cannot open for writing: " + tmp.string());
        os.write(kMagic, sizeof(kMagic));
        write_pod(os, kVersion);
        write_pod(os, static_cast<std::uint64_t>(archive.meta.size()));
        os.write(archive.meta.data(), static_cast<std::streamsize>(archive.meta.size()));
        write_pod(os, static_cast<std::uint32_t>(archive.tensors.size()));
        for (const auto& [name, t] : archive.tensors) {
            write_pod(os, static_cast<std::uint32_t>(name.size()));
            os.write(name.data(), static_cast<std::streamsize>(name.size()));
            write_pod(os, static_cast<std::uint32_t>(t.rank()));
            for (int d : t.shape()) write_pod(os, static_cast<std::int32_t>(d));
            os.write(reinterpret_cast<const char*>(t.data()),
                     static_cast<std::streamsize>(t.numel() * sizeof(double)));
        }
        if (!os) throw CheckpointError("checkpoint: write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw CheckpointError("checkpoint: rename failed: " + ec.message());
}

Archive read_archive(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("checkpoint: cannot open: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw CheckpointError("checkpoint: bad magic in " + path);
    }
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kVersion) {
        throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
    }
    Archive archive;
    const auto meta_len = read_pod<std::uint64_t>(is);
    archive.meta = read_string(is, static_cast<std::uint32_t>(meta_len));
    const auto count = read_pod<std::uint32_t>(is);
    archive.tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint32_t>(is);
        std::string name = read_string(is, name_len);
        const auto rank = read_pod<std::uint32_t>(is);
        if (rank == 0 || rank > 8) throw CheckpointError("checkpoint: bad tensor rank");
        std::vector<int> shape(rank);
        for (auto& d : shape) {
            d = read_pod<std::int32_t>(is);
            if (d <= 0) throw CheckpointError("checkpoint: bad tensor dimension");
        }
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
        if (!is) throw CheckpointError("checkpoint: truncated tensor data");
        archive.tensors.emplace_back(std::move(name), std::move(t));
    }
    return archive;
}

void pack_params(Archive& archive, const std::string& prefix,
                 const std::vector<nn::NamedParam>& params) {
    for (const auto& p : params) archive.add(prefix + "." + p.name, p.param->value);
}

void pack_buffers(Archive& archive, const std::string& prefix,
                  const std::vector<nn::NamedBuffer>& buffers) {
    for (const auto& b : buffers) archive.add(prefix + "." + b.name, *b.tensor);
}

void unpack_params(const Archive& archive, const std::string& prefix,
                   const std::vector<nn::NamedParam>& params) {
    for (const auto& p : params) {
        const Tensor* t = archive.find(prefix + "." + p.name);
        if (t == nullptr) {
            throw CheckpointError("checkpoint: missing tensor " + prefix + "." + p.name);
        }
        if (!t->same_shape(p.param->value)) {
            throw CheckpointError("checkpoint: shape mismatch for " + prefix + "." + p.name +
                                  ": " + t->shape_str() + " vs " + p.param->value.shape_str());
        }
        p.param->value = *t;
    }
}

void unpack_buffers(const Archive& archive, const std::string& prefix,
                    const std::vector<nn::NamedBuffer>& buffers) {
    for (const auto& b : buffers) {
        const Tensor* t = archive.find(prefix + "." + b.name);
        if (t == nullptr) {
            throw CheckpointError("checkpoint: missing tensor " + prefix + "." + b.name);
        }
        if (!t->same_shape(*b.tensor)) {
            throw CheckpointError("checkpoint: shape mismatch for " + prefix + "." + b.name);
        }
        *b.tensor = *t;
    }
}

}  // namespace cupgan::checkpoint
