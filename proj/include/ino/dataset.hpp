#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ino/array_io.hpp"
#include "ino/geometry.hpp"
#include "ino/tensor.hpp"

namespace ino {

/// Labeled observation pairs (f_i, u_i) over a shared point cloud, with
/// disjoint train/validation/test index sets. Augmented copies carry their
/// own transformed clouds in sample_clouds.
struct Dataset {
    std::string problem = "generic";
    ChannelLayout layout;
    std::shared_ptr<const PointCloud> cloud;
    std::vector<std::shared_ptr<const PointCloud>> sample_clouds;  // empty, or one per sample
    std::vector<Tensor> f;
    std::vector<Tensor> u;
    std::vector<std::size_t> train_idx, val_idx, test_idx;
    std::uint64_t seed = 0;
    std::string config_echo;  // generator config as JSON text

    std::size_t num_samples() const { return f.size(); }
    const PointCloud& cloud_of(std::size_t i) const;

    /// Splits [0, a), [a, a+b), [a+b, a+b+c).
    void set_contiguous_splits(std::size_t n_train, std::size_t n_val, std::size_t n_test);

    void validate() const;
};

Archive cloud_to_archive(const PointCloud& cloud);
PointCloud cloud_from_archive(const Archive& archive);

/// Dataset directory: `manifest` text file, `cloud.bin`, and per-sample
/// `sample_<idx>_f.bin` / `sample_<idx>_u.bin` array files.
void dataset_write(const Dataset& ds, const std::filesystem::path& dir);
Dataset dataset_read(const std::filesystem::path& dir);

}  // namespace ino
