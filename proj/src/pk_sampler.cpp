#include "hct/pk_sampler.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "hct/error.hpp"

namespace hct {

BatchPlan build_epoch_plan(const ClusterState& state, std::size_t p, std::size_t k, std::uint64_t seed) {
    return build_epoch_plan(std::span<const Label>(state.labels), p, k, seed);
}

BatchPlan build_epoch_plan(std::span<const Label> labels, std::size_t p, std::size_t k, std::uint64_t seed) {
    if (p == 0 || k == 0) throw SamplingError("PK sampling needs p >= 1 and k >= 1");

    // Group by label value so that non-contiguous labels (e.g. read from a
    // file) work too.
    std::vector<Label> distinct(labels.begin(), labels.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<std::vector<std::size_t>> members(distinct.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto pos = std::lower_bound(distinct.begin(), distinct.end(), labels[i]) - distinct.begin();
        members[static_cast<std::size_t>(pos)].push_back(i);
    }

    const std::size_t c = distinct.size();
    if (c < p) {
        throw SamplingError("PK sampling needs at least p = " + std::to_string(p) + " pseudo identities, have " +
                            std::to_string(c));
    }

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(c);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    BatchPlan plan;
    plan.p = p;
    plan.k = k;
    plan.seed = seed;
    const std::size_t batch_count = c / p;
    plan.batches.resize(batch_count);
    for (std::size_t b = 0; b < batch_count; ++b) {
        auto& batch = plan.batches[b];
        batch.entries.resize(p);
        for (std::size_t slot = 0; slot < p; ++slot) {
            const std::size_t cluster = order[b * p + slot];
            auto pool = members[cluster];
            auto& entry = batch.entries[slot];
            entry.pseudo_label = distinct[cluster];
            std::shuffle(pool.begin(), pool.end(), rng);
            if (pool.size() >= k) {
                entry.samples.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
            } else {
                entry.samples = pool;
                std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
                while (entry.samples.size() < k) entry.samples.push_back(pool[pick(rng)]);
            }
        }
    }
    return plan;
}

std::pair<Matrix, std::vector<Label>> materialize_batch(const Batch& batch, const Matrix& features) {
    std::vector<std::size_t> indices;
    std::vector<Label> labels;
    for (const auto& entry : batch.entries) {
        for (auto idx : entry.samples) {
            indices.push_back(idx);
            labels.push_back(entry.pseudo_label);
        }
    }
    return {gather_rows(features, indices), std::move(labels)};
}

}  // namespace hct
