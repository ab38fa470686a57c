#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hct/feature_store.hpp"
#include "hct/matrix.hpp"

namespace hct {

struct EvalReport {
    double map = 0.0;
    double rank1 = 0.0;
    double rank5 = 0.0;
    double rank10 = 0.0;
    std::size_t num_queries = 0;
};

struct LabelQualityReport {
    double pair_precision = 1.0;
    double pair_recall = 1.0;
    double pair_f1 = 1.0;
    double purity = 1.0;
    std::size_t num_clusters = 0;
    std::uint64_t tp_pairs = 0;
    std::uint64_t fp_pairs = 0;
    std::uint64_t fn_pairs = 0;
};

/// Ranks the gallery for every query by cosine distance (ties by gallery
/// index). AP is the mean precision at the rank of each relevant item.
/// Every query label must occur in the gallery.
EvalReport evaluate_retrieval(const Matrix& query, const Matrix& gallery, std::span<const Label> query_labels,
                              std::span<const Label> gallery_labels);

/// Pair counting over all C(n,2) sample pairs. Precision (recall) is 1 when
/// no pair shares a pseudo (true) label.
LabelQualityReport label_quality(std::span<const Label> pseudo_labels, std::span<const Label> true_labels);

struct QueryGallerySplit {
    std::vector<std::size_t> query_ids;
    std::vector<std::size_t> gallery_ids;
    std::vector<Label> query_labels;
    std::vector<Label> gallery_labels;
};

/// One random sample per identity goes to the query set, the rest to the
/// gallery. Both id lists are ascending.
QueryGallerySplit split_query_gallery(const FeatureMatrix& features, std::uint64_t seed);

/// Evaluates already-embedded rows using the split's query/gallery ids.
EvalReport evaluate_split(const Matrix& embeddings, const QueryGallerySplit& split);

/// Flat JSON object with the report fields and the iteration index.
std::string report_json(const EvalReport& eval, const LabelQualityReport& quality, std::size_t iteration);

}  // namespace hct
