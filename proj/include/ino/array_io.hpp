#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ino/tensor.hpp"

namespace ino {

/// Single-array file: magic "INOA", version, dtype, shape header, then the
/// payload as little-endian scalars.
void write_array(const std::filesystem::path& path, const Tensor& t);
Tensor read_array(const std::filesystem::path& path);

/// One named array inside an archive file; either f64 or i64 payload.
struct ArchiveEntry {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> f64;
    std::vector<std::int64_t> i64;
    bool f64_type = true;

    bool is_f64() const { return f64_type; }

    static ArchiveEntry tensor(std::string name, const Tensor& t);
    static ArchiveEntry ints(std::string name, std::vector<std::int64_t> v);
    Tensor to_tensor() const;
};

using Archive = std::vector<ArchiveEntry>;

/// Multi-array container: magic "INOC", entry count, then entries.
void write_archive(const std::filesystem::path& path, const Archive& entries);
Archive read_archive(const std::filesystem::path& path);

const ArchiveEntry& archive_get(const Archive& archive, const std::string& name);
const ArchiveEntry* archive_find(const Archive& archive, const std::string& name);

}  // namespace ino
