#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "hct/matrix.hpp"
#include "hct/metric_space.hpp"

namespace hct {

/// Bottom-up merge plan: `merges_per_step` nearest-cluster pairs are merged in
/// each of `steps` steps. The per-step count is fixed from the initial sample
/// count and never recomputed.
struct MergeSchedule {
    std::size_t samples = 0;
    double merge_percent = 0.07;
    std::size_t steps = 13;
    std::size_t merges_per_step = 0;

    /// Computes merges_per_step = floor(merge_percent * samples) and validates.
    static MergeSchedule make(std::size_t samples, double merge_percent, std::size_t steps);

    std::size_t final_clusters() const noexcept { return samples - steps * merges_per_step; }

    /// Throws ScheduleError if some step would have fewer than 2m clusters.
    void validate() const;
};

/// A partition of samples into clusters plus the UPGMA distances between them.
struct ClusterState {
    std::vector<Label> labels;        // per sample, in 0..c-1
    std::vector<std::size_t> sizes;   // per cluster
    DistanceMatrix cluster_dist;      // c x c

    std::size_t cluster_count() const noexcept { return sizes.size(); }
    std::size_t sample_count() const noexcept { return labels.size(); }

    /// Sample indices of every cluster, in ascending order.
    std::vector<std::vector<std::size_t>> members() const;

    /// Throws ValidationError if the labels are not a contiguous partition
    /// consistent with sizes and cluster_dist.
    void validate() const;
};

using ClusterPair = std::pair<std::size_t, std::size_t>;

/// Every sample is its own cluster; cluster distances are the sample distances.
ClusterState init_clusters(const DistanceMatrix& dist);
ClusterState init_clusters(DistanceMatrix&& dist);

/// Greedily picks `m` pairwise-disjoint cluster pairs by ascending distance.
/// Ties are broken by (smaller id, larger id). Each pair is returned as
/// (smaller id, larger id), in selection order.
std::vector<ClusterPair> select_merge_pairs(const ClusterState& state, std::size_t m);

/// Merges the selected pairs, updates distances with the size-weighted UPGMA
/// recurrence and relabels clusters to 0..c-m-1 preserving relative order.
ClusterState merge_step(ClusterState state, std::size_t m);

/// init_clusters followed by `schedule.steps` merge steps.
ClusterState run_clustering(const DistanceMatrix& dist, const MergeSchedule& schedule);
ClusterState run_clustering(DistanceMatrix&& dist, const MergeSchedule& schedule);

/// `id,pseudo_label` CSV.
void save_pseudo_labels(std::span<const Label> labels, const std::filesystem::path& path);
std::vector<Label> load_pseudo_labels(const std::filesystem::path& path);

}  // namespace hct
