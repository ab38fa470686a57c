#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hct/matrix.hpp"

namespace hct {

struct AnchorTerm {
    std::size_t anchor = 0;
    std::size_t positive = 0;  // equals anchor when the anchor has no positives
    double positive_dist = 0.0;
    std::size_t negative = 0;
    double negative_dist = 0.0;

    double hinge(double margin) const noexcept {
        const double v = margin + positive_dist - negative_dist;
        return v > 0.0 ? v : 0.0;
    }
};

struct TripletLossReport {
    double loss = 0.0;  // sum over anchors
    std::size_t active_anchors = 0;
    std::vector<AnchorTerm> per_anchor;
    double margin = 0.0;
};

/// Batch-hard triplet loss: for every anchor, the farthest same-label sample
/// and the nearest other-label sample under Euclidean distance, hinged at
/// `margin`. Ties pick the lowest index. An anchor whose label occurs once
/// gets positive distance 0. Distances that overflow make the loss NaN.
TripletLossReport batch_hard_loss(const Matrix& embeddings, std::span<const Label> labels, double margin);

/// Gradient of the summed loss with respect to each embedding row.
/// Inactive hinges contribute nothing; a hardest positive at distance 0 also
/// contributes nothing. An active hinge whose hardest negative coincides with
/// the anchor raises GradientSingularityError.
Matrix batch_hard_gradient(const Matrix& embeddings, std::span<const Label> labels, double margin);

struct TripletLossWithGradient {
    TripletLossReport report;
    Matrix gradient;
};

TripletLossWithGradient batch_hard_loss_and_gradient(const Matrix& embeddings, std::span<const Label> labels,
                                                     double margin);

}  // namespace hct
