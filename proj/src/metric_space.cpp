#include "hct/metric_space.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "hct/error.hpp"

namespace hct {

void DistanceMatrix::retain(std::span<const std::size_t> kept) {
    const std::size_t new_size = kept.size();
    for (std::size_t k = 0; k < new_size; ++k) {
        if (kept[k] >= size_ || (k > 0 && kept[k] <= kept[k - 1])) {
            throw ValidationError("DistanceMatrix::retain: indices must be strictly increasing and in range");
        }
    }
    // Destination offsets never exceed source offsets, so a forward sweep is safe.
    for (std::size_t i = 0; i < new_size; ++i) {
        const double* src = entries_.data() + kept[i] * size_;
        double* dst = entries_.data() + i * new_size;
        for (std::size_t j = 0; j < new_size; ++j) dst[j] = src[kept[j]];
    }
    entries_.resize(new_size * new_size);
    size_ = new_size;
}

DistanceMatrix DistanceMatrix::from_matrix(const Matrix& m) {
    if (m.rows() != m.cols()) throw ValidationError("distance matrix must be square");
    DistanceMatrix out(m.rows());
    out.entries_ = m.data();
    out.validate();
    return out;
}

void DistanceMatrix::validate() const {
    for (std::size_t i = 0; i < size_; ++i) {
        if ((*this)(i, i) != 0.0) throw ValidationError("distance matrix has a non-zero diagonal");
        for (std::size_t j = i + 1; j < size_; ++j) {
            const double v = (*this)(i, j);
            if (!std::isfinite(v) || v < 0.0 || v != (*this)(j, i)) {
                throw ValidationError("distance matrix entry (" + std::to_string(i) + "," + std::to_string(j) +
                                      ") is not a finite symmetric non-negative value");
            }
        }
    }
}

DistanceMatrix pairwise_euclidean(const Matrix& features, unsigned threads) {
    if (!features.all_finite()) throw ValidationError("pairwise_euclidean: features contain NaN or Inf");
    const std::size_t n = features.rows();
    DistanceMatrix out(n);
    auto& entries = out.entries_;

    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t i = first; i < n; i += stride) {
            const auto xi = features.row(i);
            for (std::size_t j = i + 1; j < n; ++j) {
                const double v = std::sqrt(squared_distance(xi, features.row(j)));
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
    };

    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    }
    return out;
}

Matrix pairwise_cosine_distance(const Matrix& queries, const Matrix& gallery) {
    if (queries.cols() != gallery.cols()) throw ValidationError("cosine distance: dimension mismatch");
    auto norms = [](const Matrix& m, const char* what) {
        std::vector<double> out(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) {
            const auto r = m.row(i);
            double s = 0.0;
            for (double v : r) s += v * v;
            out[i] = std::sqrt(s);
            if (!(out[i] > 0.0) || !std::isfinite(out[i])) {
                throw ValidationError(std::string("cosine distance: ") + what + " sample " + std::to_string(i) +
                                      " has zero or non-finite norm");
            }
        }
        return out;
    };
    const auto qn = norms(queries, "query");
    const auto gn = norms(gallery, "gallery");

    Matrix out(queries.rows(), gallery.rows());
    for (std::size_t i = 0; i < queries.rows(); ++i) {
        const auto q = queries.row(i);
        for (std::size_t j = 0; j < gallery.rows(); ++j) {
            const auto g = gallery.row(j);
            double dot = 0.0;
            for (std::size_t k = 0; k < q.size(); ++k) dot += q[k] * g[k];
            const double cosine = std::clamp(dot / (qn[i] * gn[j]), -1.0, 1.0);
            out(i, j) = 1.0 - cosine;
        }
    }
    return out;
}

double upgma_cluster_distance(std::span<const std::size_t> cluster_a,
                              std::span<const std::size_t> cluster_b,
                              const DistanceMatrix& dist) {
    if (cluster_a.empty() || cluster_b.empty()) throw ValidationError("upgma_cluster_distance: empty cluster");
    std::vector<bool> in_a(dist.size(), false);
    for (auto i : cluster_a) {
        if (i >= dist.size()) throw ValidationError("upgma_cluster_distance: sample index out of range");
        in_a[i] = true;
    }
    for (auto j : cluster_b) {
        if (j >= dist.size()) throw ValidationError("upgma_cluster_distance: sample index out of range");
        if (in_a[j]) throw ValidationError("upgma_cluster_distance: clusters overlap at sample " + std::to_string(j));
    }
    double sum = 0.0;
    for (auto i : cluster_a) {
        const auto row = dist.row(i);
        for (auto j : cluster_b) sum += row[j];
    }
    return sum / (static_cast<double>(cluster_a.size()) * static_cast<double>(cluster_b.size()));
}

}  // namespace hct
