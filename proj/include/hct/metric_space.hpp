#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hct/error.hpp"
#include "hct/feature_store.hpp"
#include "hct/matrix.hpp"

namespace hct {

/// Symmetric square matrix of non-negative distances with a zero diagonal.
/// Stored in full so that rows can be scanned contiguously.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    explicit DistanceMatrix(std::size_t size) : size_(size), entries_(size * size, 0.0) {}

    /// Copies a square matrix and validates it.
    static DistanceMatrix from_matrix(const Matrix& m);

    std::size_t size() const noexcept { return size_; }

    double operator()(std::size_t i, std::size_t j) const { return entries_[i * size_ + j]; }

    /// Sets both (i,j) and (j,i).
    void set(std::size_t i, std::size_t j, double v) {
        entries_[i * size_ + j] = v;
        entries_[j * size_ + i] = v;
    }

    std::span<const double> row(std::size_t i) const { return {entries_.data() + i * size_, size_}; }
    const std::vector<double>& entries() const noexcept { return entries_; }

    /// Keeps only the listed indices (strictly increasing), compacting in place.
    void retain(std::span<const std::size_t> kept);

    /// Throws ValidationError unless symmetric, finite, non-negative, zero diagonal.
    void validate() const;

    friend bool operator==(const DistanceMatrix&, const DistanceMatrix&) = default;

private:
    friend DistanceMatrix pairwise_euclidean(const Matrix&, unsigned);

    std::size_t size_ = 0;
    std::vector<double> entries_;
};

/// Euclidean distances between all rows. `threads` > 1 partitions rows across
/// workers; every entry is computed with the same operation order either way.
DistanceMatrix pairwise_euclidean(const Matrix& features, unsigned threads = 1);
inline DistanceMatrix pairwise_euclidean(const FeatureMatrix& features, unsigned threads = 1) {
    return pairwise_euclidean(features.values, threads);
}

/// queries.rows() x gallery.rows() matrix of 1 - cos(q, g).
Matrix pairwise_cosine_distance(const Matrix& queries, const Matrix& gallery);

/// Unweighted mean of all cross-cluster sample distances (UPGMA linkage).
double upgma_cluster_distance(std::span<const std::size_t> cluster_a,
                              std::span<const std::size_t> cluster_b,
                              const DistanceMatrix& dist);

/// Distance from the union of clusters a and b to a third cluster c, given
/// d(a,c), d(b,c) and the sizes of a and b.
constexpr double upgma_merge_update(double d_ac, double d_bc, std::size_t n_a, std::size_t n_b) {
    if (n_a == 0 || n_b == 0) throw ValidationError("upgma_merge_update: cluster sizes must be positive");
    const double wa = static_cast<double>(n_a);
    const double wb = static_cast<double>(n_b);
    return (wa * d_ac + wb * d_bc) / (wa + wb);
}

}  // namespace hct
