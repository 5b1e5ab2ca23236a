#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ino {

/// Quadrature structure for the kernel integral on a discretized domain.
/// Row x of the table lists the nodes y it integrates against, the quadrature
/// weight of each y, the row of the kernel-feature matrix holding the features
/// of the pair (x, y), and optionally the coordinate difference x - y.
struct PairTable {
    std::size_t num_nodes = 0;
    std::vector<std::int64_t> offsets;      // num_nodes + 1
    std::vector<std::int32_t> targets;      // per pair: index of y
    std::vector<std::int32_t> feature_row;  // per pair: row into the kernel-feature matrix
    std::vector<double> weights;            // per pair: quadrature weight of y
    std::vector<double> diffs;              // per pair: (x - y), 2 entries; empty unless filled

    // Pair indices grouped by feature row and by target node, ascending within
    // each group. The backward pass partitions work over groups so every
    // accumulator row has a single writer and a fixed summation order.
    std::vector<std::int64_t> feat_offsets;    // unique rows + 1
    std::vector<std::int32_t> feat_pairs;      // num_pairs
    std::vector<std::int64_t> target_offsets;  // num_nodes + 1
    std::vector<std::int32_t> target_pairs;    // num_pairs

    std::size_t num_pairs() const { return targets.size(); }
    bool has_groups() const { return !feat_offsets.empty(); }
    void build_groups(std::size_t unique_rows);
};

}  // namespace ino
