#include "hct/triplet_loss.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "hct/error.hpp"
#include "hct/metric_space.hpp"

namespace hct {

TripletLossReport batch_hard_loss(const Matrix& embeddings, std::span<const Label> labels, double margin) {
    const std::size_t n = embeddings.rows();
    if (labels.size() != n) throw ValidationError("triplet loss: label count differs from batch size");
    if (!(margin > 0.0) || !std::isfinite(margin)) throw ValidationError("triplet loss: margin must be positive");
    bool has_second_label = false;
    for (std::size_t i = 1; i < n && !has_second_label; ++i) has_second_label = labels[i] != labels[0];
    if (!has_second_label) throw ValidationError("triplet loss: batch needs at least two distinct labels");

    const auto dist = pairwise_euclidean(embeddings);

    TripletLossReport report;
    report.margin = margin;
    report.per_anchor.resize(n);
    bool overflow = false;
    for (std::size_t a = 0; a < n; ++a) {
        auto& term = report.per_anchor[a];
        term.anchor = a;
        term.positive = a;
        term.positive_dist = 0.0;
        bool have_pos = false;
        bool have_neg = false;
        const auto row = dist.row(a);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == a) continue;
            if (labels[j] == labels[a]) {
                if (!have_pos || row[j] > term.positive_dist) {
                    term.positive = j;
                    term.positive_dist = row[j];
                    have_pos = true;
                }
            } else if (!have_neg || row[j] < term.negative_dist) {
                term.negative = j;
                term.negative_dist = row[j];
                have_neg = true;
            }
        }
        if (!std::isfinite(term.positive_dist) || !std::isfinite(term.negative_dist)) overflow = true;
        const double h = term.hinge(margin);
        if (h > 0.0) ++report.active_anchors;
        report.loss += h;
    }
    if (overflow) report.loss = std::numeric_limits<double>::quiet_NaN();
    return report;
}

TripletLossWithGradient batch_hard_loss_and_gradient(const Matrix& embeddings, std::span<const Label> labels,
                                                     double margin) {
    TripletLossWithGradient out{batch_hard_loss(embeddings, labels, margin),
                                Matrix(embeddings.rows(), embeddings.cols())};
    const std::size_t e = embeddings.cols();
    auto& grad = out.gradient;
    for (const auto& term : out.report.per_anchor) {
        if (term.hinge(margin) <= 0.0) continue;
        const auto xa = embeddings.row(term.anchor);
        if (term.positive_dist > 0.0) {
            const auto xp = embeddings.row(term.positive);
            for (std::size_t j = 0; j < e; ++j) {
                const double g = (xa[j] - xp[j]) / term.positive_dist;
                grad(term.anchor, j) += g;
                grad(term.positive, j) -= g;
            }
        }
        if (term.negative_dist == 0.0) {
            throw GradientSingularityError("triplet gradient: anchor " + std::to_string(term.anchor) +
                                           " coincides with its hardest negative " + std::to_string(term.negative));
        }
        const auto xn = embeddings.row(term.negative);
        for (std::size_t j = 0; j < e; ++j) {
            const double g = (xa[j] - xn[j]) / term.negative_dist;
            grad(term.anchor, j) -= g;
            grad(term.negative, j) += g;
        }
    }
    return out;
}

Matrix batch_hard_gradient(const Matrix& embeddings, std::span<const Label> labels, double margin) {
    return batch_hard_loss_and_gradient(embeddings, labels, margin).gradient;
}

}  // namespace hct
