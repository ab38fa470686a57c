#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "hct/hier_cluster.hpp"
#include "hct/matrix.hpp"

namespace hct {

struct BatchEntry {
    Label pseudo_label = 0;
    std::vector<std::size_t> samples;  // exactly k sample indices
};

/// One mini-batch: p distinct pseudo identities with k samples each.
struct Batch {
    std::vector<BatchEntry> entries;
};

struct BatchPlan {
    std::vector<Batch> batches;
    std::size_t p = 0;
    std::size_t k = 0;
    std::uint64_t seed = 0;
};

/// One epoch of PK batches. Identities are shuffled and consumed p at a time;
/// the c mod p leftovers sit out this epoch. Clusters with at least k members
/// contribute k distinct samples. Smaller clusters contribute every member
/// once, and the remaining slots are drawn from the cluster with replacement.
BatchPlan build_epoch_plan(const ClusterState& state, std::size_t p, std::size_t k, std::uint64_t seed);
BatchPlan build_epoch_plan(std::span<const Label> labels, std::size_t p, std::size_t k, std::uint64_t seed);

/// Gathers the batch rows in plan order together with their pseudo labels.
std::pair<Matrix, std::vector<Label>> materialize_batch(const Batch& batch, const Matrix& features);

}  // namespace hct
