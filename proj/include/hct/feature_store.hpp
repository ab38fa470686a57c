#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "hct/matrix.hpp"

namespace hct {

/// n samples by d features. Sample ids are the row indices 0..n-1.
struct FeatureMatrix {
    Matrix values;
    std::optional<std::vector<Label>> true_labels;

    std::size_t n() const noexcept { return values.rows(); }
    std::size_t d() const noexcept { return values.cols(); }
    bool has_labels() const noexcept { return true_labels.has_value(); }

    /// Throws ValidationError if values are non-finite or the label count is wrong.
    void validate() const;

    friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

/// Gaussian identity clusters with optional near-duplicate identity pairs and
/// displaced outliers.
struct SyntheticSpec {
    std::size_t num_identities = 10;
    std::size_t samples_per_identity = 10;
    std::size_t feature_dim = 8;
    double cluster_stddev = 1.0;
    double centroid_scale = 10.0;
    /// Fraction of identities placed in close pairs. Must round to an even count.
    double hard_pair_fraction = 0.0;
    /// Centroid separation of a hard pair, in units of cluster_stddev.
    double hard_pair_gap = 1.0;
    double outlier_fraction = 0.0;
    std::uint64_t seed = 0;

    void validate() const;

    /// Number of identities that belong to a hard pair. Those are always the
    /// identities 0..hard_identity_count()-1, paired as (0,1), (2,3), ...
    std::size_t hard_identity_count() const;
};

/// Rows are ordered identity-major: sample i belongs to identity
/// i / samples_per_identity. Outliers keep their identity.
FeatureMatrix generate_synthetic(const SyntheticSpec& spec);

/// Reads the `id,label,f0,...` CSV format; the label column is optional.
FeatureMatrix load_features(const std::filesystem::path& path);

/// Rows in id order; values read back bit-exactly.
void save_features(const FeatureMatrix& features, const std::filesystem::path& path);

}  // namespace hct
