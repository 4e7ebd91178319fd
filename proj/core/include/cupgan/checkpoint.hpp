#pragma once

#include <string>
#include <vector>

#include "cupgan/layers.hpp"
#include "cupgan/tensor.hpp"

namespace cupgan::checkpoint {

// A named-tensor archive with one JSON metadata record. This is the single
// on-disk format for trainer checkpoints and saved feature extractors.
struct Archive {
    std::string meta;  // UTF-8 JSON text
    std::vector<std::pair<std::string, Tensor>> tensors;

    void add(const std::string& name, const Tensor& t) { tensors.emplace_back(name, t); }
    const Tensor* find(const std::string& name) const;
};

// Writes atomically (temp file + rename) so a crash never leaves a torn
// checkpoint behind the `latest` pointer.
void write_archive(const std::string& path, const Archive& archive);

// Throws CheckpointError on unreadable, truncated or malformed archives.
Archive read_archive(const std::string& path);

// Copies every named parameter's value into the archive under `prefix.`.
void pack_params(Archive& archive, const std::string& prefix,
                 const std::vector<nn::NamedParam>& params);
void pack_buffers(Archive& archive, const std::string& prefix,
                  const std::vector<nn::NamedBuffer>& buffers);

// Restores parameter values; every expected tensor must be present with an
// identical shape, otherwise CheckpointError (no silent reshape).
void unpack_params(const Archive& archive, const std::string& prefix,
                   const std::vector<nn::NamedParam>& params);
void unpack_buffers(const Archive& archive, const std::string& prefix,
                    const std::vector<nn::NamedBuffer>& buffers);

}  // namespace cupgan::checkpoint
