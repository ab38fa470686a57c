#include "hct/evaluator.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include <json.hpp>

#include "hct/error.hpp"
#include "hct/metric_space.hpp"

namespace hct {

namespace {

std::uint64_t pairs_of(std::uint64_t n) { return n * (n - (n > 0 ? 1 : 0)) / 2; }

}  // namespace

EvalReport evaluate_retrieval(const Matrix& query, const Matrix& gallery, std::span<const Label> query_labels,
                              std::span<const Label> gallery_labels) {
    if (query_labels.size() != query.rows() || gallery_labels.size() != gallery.rows()) {
        throw ValidationError("evaluate_retrieval: label counts do not match the matrices");
    }
    if (query.rows() == 0) throw ValidationError("evaluate_retrieval: no queries");

    std::vector<Label> unmatched;
    for (auto q : query_labels) {
        if (std::find(gallery_labels.begin(), gallery_labels.end(), q) == gallery_labels.end()) unmatched.push_back(q);
    }
    if (!unmatched.empty()) {
        std::sort(unmatched.begin(), unmatched.end());
        unmatched.erase(std::unique(unmatched.begin(), unmatched.end()), unmatched.end());
        std::string list;
        for (auto l : unmatched) list += (list.empty() ? "" : ",") + std::to_string(l);
        throw ValidationError("evaluate_retrieval: query labels without a gallery match: " + list);
    }

    const Matrix dist = pairwise_cosine_distance(query, gallery);
    const std::size_t ng = gallery.rows();
    std::vector<std::size_t> order(ng);
    double ap_sum = 0.0;
    std::size_t hits1 = 0, hits5 = 0, hits10 = 0;
    for (std::size_t q = 0; q < query.rows(); ++q) {
        const auto row = dist.row(q);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return row[a] < row[b] || (row[a] == row[b] && a < b);
        });
        std::size_t relevant = 0;
        std::size_t first_hit = ng;
        double precision_sum = 0.0;
        for (std::size_t r = 0; r < ng; ++r) {
            if (gallery_labels[order[r]] != query_labels[q]) continue;
            ++relevant;
            precision_sum += static_cast<double>(relevant) / static_cast<double>(r + 1);
            if (first_hit == ng) first_hit = r;
        }
        ap_sum += precision_sum / static_cast<double>(relevant);
        hits1 += first_hit < 1;
        hits5 += first_hit < 5;
        hits10 += first_hit < 10;
    }
    const double nq = static_cast<double>(query.rows());
    return EvalReport{ap_sum / nq, static_cast<double>(hits1) / nq, static_cast<double>(hits5) / nq,
                      static_cast<double>(hits10) / nq, query.rows()};
}

LabelQualityReport label_quality(std::span<const Label> pseudo_labels, std::span<const Label> true_labels) {
    if (pseudo_labels.size() != true_labels.size()) {
        throw ValidationError("label_quality: pseudo and true label counts differ");
    }
    const std::size_t n = pseudo_labels.size();
    if (n < 2) throw ValidationError("label_quality: need at least two samples");

    std::map<std::pair<Label, Label>, std::uint64_t> cells;
    std::map<Label, std::uint64_t> pseudo_counts;
    std::map<Label, std::uint64_t> true_counts;
    for (std::size_t i = 0; i < n; ++i) {
        ++cells[{pseudo_labels[i], true_labels[i]}];
        ++pseudo_counts[pseudo_labels[i]];
        ++true_counts[true_labels[i]];
    }

    std::uint64_t tp = 0;
    for (const auto& [key, count] : cells) tp += pairs_of(count);
    std::uint64_t same_pseudo = 0;
    for (const auto& [label, count] : pseudo_counts) same_pseudo += pairs_of(count);
    std::uint64_t same_true = 0;
    for (const auto& [label, count] : true_counts) same_true += pairs_of(count);

    // Majority true label per pseudo cluster; cells are ordered by pseudo label.
    std::map<Label, std::uint64_t> majority;
    for (const auto& [key, count] : cells) majority[key.first] = std::max(majority[key.first], count);
    std::uint64_t majority_sum = 0;
    for (const auto& [label, count] : majority) majority_sum += count;

    LabelQualityReport r;
    r.tp_pairs = tp;
    r.fp_pairs = same_pseudo - tp;
    r.fn_pairs = same_true - tp;
    r.pair_precision = same_pseudo == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(same_pseudo);
    r.pair_recall = same_true == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(same_true);
    const double denom = r.pair_precision + r.pair_recall;
    r.pair_f1 = denom == 0.0 ? 0.0 : 2.0 * r.pair_precision * r.pair_recall / denom;
    r.purity = static_cast<double>(majority_sum) / static_cast<double>(n);
    r.num_clusters = pseudo_counts.size();
    return r;
}

QueryGallerySplit split_query_gallery(const FeatureMatrix& features, std::uint64_t seed) {
    if (!features.has_labels()) throw ValidationError("query/gallery split needs true labels");
    const auto& labels = *features.true_labels;
    std::map<Label, std::vector<std::size_t>> by_identity;
    for (std::size_t i = 0; i < labels.size(); ++i) by_identity[labels[i]].push_back(i);

    std::mt19937_64 rng(seed);
    std::vector<bool> is_query(labels.size(), false);
    for (const auto& [label, members] : by_identity) {
        if (members.size() < 2) {
            throw ValidationError("query/gallery split: identity " + std::to_string(label) + " has a single sample");
        }
        std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
        is_query[members[pick(rng)]] = true;
    }

    QueryGallerySplit split;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (is_query[i]) {
            split.query_ids.push_back(i);
            split.query_labels.push_back(labels[i]);
        } else {
            split.gallery_ids.push_back(i);
            split.gallery_labels.push_back(labels[i]);
        }
    }
    return split;
}

EvalReport evaluate_split(const Matrix& embeddings, const QueryGallerySplit& split) {
    return evaluate_retrieval(gather_rows(embeddings, split.query_ids), gather_rows(embeddings, split.gallery_ids),
                              split.query_labels, split.gallery_labels);
}

std::string report_json(const EvalReport& eval, const LabelQualityReport& quality, std::size_t iteration) {
    nlohmann::ordered_json j;
    j["map"] = eval.map;
    j["rank1"] = eval.rank1;
    j["rank5"] = eval.rank5;
    j["rank10"] = eval.rank10;
    j["pair_precision"] = quality.pair_precision;
    j["pair_recall"] = quality.pair_recall;
    j["pair_f1"] = quality.pair_f1;
    j["purity"] = quality.purity;
    j["num_clusters"] = quality.num_clusters;
    j["iteration"] = iteration;
    return j.dump();
}

}  // namespace hct
