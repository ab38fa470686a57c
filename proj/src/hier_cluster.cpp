#include "hct/hier_cluster.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <tuple>

#include "csv_util.hpp"
#include "hct/error.hpp"

namespace hct {

namespace {

struct Candidate {
    double dist;
    std::size_t a;
    std::size_t b;

    friend bool operator<(const Candidate& x, const Candidate& y) {
        return std::tie(x.dist, x.a, x.b) < std::tie(y.dist, y.a, y.b);
    }
};

// The `limit` smallest pairs (a < b) in (dist, a, b) order, sorted ascending.
std::vector<Candidate> smallest_pairs(const DistanceMatrix& d, std::size_t limit) {
    const std::size_t c = d.size();
    std::priority_queue<Candidate> heap;  // max-heap of the current best
    for (std::size_t a = 0; a < c; ++a) {
        const auto row = d.row(a);
        for (std::size_t b = a + 1; b < c; ++b) {
            const Candidate cand{row[b], a, b};
            if (heap.size() < limit) {
                heap.push(cand);
            } else if (cand.dist <= heap.top().dist && cand < heap.top()) {
                heap.pop();
                heap.push(cand);
            }
        }
    }
    std::vector<Candidate> out;
    out.reserve(heap.size());
    while (!heap.empty()) {
        out.push_back(heap.top());
        heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

}  // namespace

MergeSchedule MergeSchedule::make(std::size_t samples, double merge_percent, std::size_t steps) {
    if (!(merge_percent > 0.0 && merge_percent < 1.0)) {
        throw ScheduleError("merge percent must lie in (0,1), got " + std::to_string(merge_percent));
    }
    MergeSchedule s;
    s.samples = samples;
    s.merge_percent = merge_percent;
    s.steps = steps;
    // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
    s.merges_per_step = static_cast<std::size_t>(std::floor(merge_percent * static_cast<double>(samples) + 1e-9));
    s.validate();
    return s;
}

void MergeSchedule::validate() const {
    if (merges_per_step < 1) {
        throw ScheduleError("merge schedule: floor(mp * n) = 0 merges per step (n = " + std::to_string(samples) + ")");
    }
    if (steps == 0) return;
    if (steps * merges_per_step >= samples) {
        throw ScheduleError("merge schedule infeasible: n - s*m = " + std::to_string(samples) + " - " +
                            std::to_string(steps) + "*" + std::to_string(merges_per_step) + " < 1");
    }
    // Clusters before the last step: n - (s-1)m, which must be at least 2m.
    const std::size_t before_last = samples - (steps - 1) * merges_per_step;
    if (before_last < 2 * merges_per_step) {
        throw ScheduleError("merge schedule infeasible: step " + std::to_string(steps) + " starts with " +
                            std::to_string(before_last) + " clusters, fewer than 2m = " +
                            std::to_string(2 * merges_per_step));
    }
}

std::vector<std::vector<std::size_t>> ClusterState::members() const {
    std::vector<std::vector<std::size_t>> out(cluster_count());
    for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<std::size_t>(labels[i])].push_back(i);
    return out;
}

void ClusterState::validate() const {
    const std::size_t c = cluster_count();
    if (cluster_dist.size() != c) throw ValidationError("cluster state: distance matrix size differs from cluster count");
    std::vector<std::size_t> counts(c, 0);
    for (auto label : labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= c) {
            throw ValidationError("cluster state: label " + std::to_string(label) + " outside 0.." + std::to_string(c));
        }
        ++counts[static_cast<std::size_t>(label)];
    }
    for (std::size_t k = 0; k < c; ++k) {
        if (counts[k] == 0 || counts[k] != sizes[k]) {
            throw ValidationError("cluster state: cluster " + std::to_string(k) + " size mismatch");
        }
    }
}

ClusterState init_clusters(const DistanceMatrix& dist) { return init_clusters(DistanceMatrix(dist)); }

ClusterState init_clusters(DistanceMatrix&& dist) {
    const std::size_t n = dist.size();
    ClusterState state;
    state.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) state.labels[i] = static_cast<Label>(i);
    state.sizes.assign(n, 1);
    state.cluster_dist = std::move(dist);
    return state;
}

std::vector<ClusterPair> select_merge_pairs(const ClusterState& state, std::size_t m) {
    const std::size_t c = state.cluster_count();
    if (m == 0) return {};
    if (c < 2 * m) {
        throw ScheduleError("cannot select " + std::to_string(m) + " disjoint pairs from " + std::to_string(c) +
                            " clusters");
    }
    const std::size_t total = c * (c - 1) / 2;
    std::size_t limit = std::min(total, std::max<std::size_t>(4 * m, 64));
    while (true) {
        // The candidates are exactly the first `limit` pairs of the global
        // sorted order, so a greedy pass over them is a prefix of the full pass.
        const auto candidates = smallest_pairs(state.cluster_dist, limit);
        std::vector<bool> used(c, false);
        std::vector<ClusterPair> picked;
        picked.reserve(m);
        for (const auto& cand : candidates) {
            if (used[cand.a] || used[cand.b]) continue;
            used[cand.a] = used[cand.b] = true;
            picked.emplace_back(cand.a, cand.b);
            if (picked.size() == m) return picked;
        }
        if (limit == total) {
            throw ScheduleError("greedy selection found only " + std::to_string(picked.size()) + " of " +
                                std::to_string(m) + " pairs");
        }
        limit = std::min(total, limit * 4);
    }
}

ClusterState merge_step(ClusterState state, std::size_t m) {
    const auto pairs = select_merge_pairs(state, m);
    const std::size_t c = state.cluster_count();
    auto& dist = state.cluster_dist;

    std::vector<bool> alive(c, true);
    std::vector<std::size_t> absorbed_into(c);
    for (std::size_t k = 0; k < c; ++k) absorbed_into[k] = k;

    for (const auto& [a, b] : pairs) {
        const std::size_t na = state.sizes[a];
        const std::size_t nb = state.sizes[b];
        for (std::size_t x = 0; x < c; ++x) {
            if (!alive[x] || x == a || x == b) continue;
            dist.set(a, x, upgma_merge_update(dist(a, x), dist(b, x), na, nb));
        }
        state.sizes[a] = na + nb;
        alive[b] = false;
        absorbed_into[b] = a;
    }

    std::vector<std::size_t> kept;
    kept.reserve(c - pairs.size());
    std::vector<Label> new_id(c, -1);
    for (std::size_t k = 0; k < c; ++k) {
        if (!alive[k]) continue;
        new_id[k] = static_cast<Label>(kept.size());
        kept.push_back(k);
    }
    for (auto& label : state.labels) {
        label = new_id[absorbed_into[static_cast<std::size_t>(label)]];
    }
    std::vector<std::size_t> sizes(kept.size());
    for (std::size_t k = 0; k < kept.size(); ++k) sizes[k] = state.sizes[kept[k]];
    state.sizes = std::move(sizes);
    dist.retain(kept);
    return state;
}

ClusterState run_clustering(const DistanceMatrix& dist, const MergeSchedule& schedule) {
    return run_clustering(DistanceMatrix(dist), schedule);
}

ClusterState run_clustering(DistanceMatrix&& dist, const MergeSchedule& schedule) {
    if (schedule.samples != dist.size()) {
        throw ScheduleError("merge schedule built for " + std::to_string(schedule.samples) +
                            " samples, distance matrix has " + std::to_string(dist.size()));
    }
    schedule.validate();
    auto state = init_clusters(std::move(dist));
    for (std::size_t step = 0; step < schedule.steps; ++step) {
        state = merge_step(std::move(state), schedule.merges_per_step);
    }
    return state;
}

void save_pseudo_labels(std::span<const Label> labels, const std::filesystem::path& path) {
    auto out = detail::open_for_write(path);
    out << "id,pseudo_label\n";
    for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
    if (!out) throw Error("failed writing " + path.string());
}

std::vector<Label> load_pseudo_labels(const std::filesystem::path& path) {
    detail::LineReader reader(path);
    std::string line;
    if (!reader.next(line) || line != "id,pseudo_label") reader.fail("expected header 'id,pseudo_label'");
    std::vector<std::pair<std::int64_t, Label>> rows;
    std::vector<std::size_t> line_of;
    while (reader.next(line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_fields(line);
        if (fields.size() != 2) reader.fail("expected 2 fields");
        const auto id = detail::parse_int(fields[0]);
        const auto label = detail::parse_int(fields[1]);
        if (!id || *id < 0 || !label) reader.fail("invalid id or label");
        rows.emplace_back(*id, *label);
        line_of.push_back(reader.line_no());
    }
    std::vector<Label> labels(rows.size());
    std::vector<bool> seen(rows.size(), false);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto id = static_cast<std::size_t>(rows[r].first);
        if (id >= rows.size() || seen[id]) {
            throw ParseError(path.string(), line_of[r], "duplicate or out-of-range id " + std::to_string(id));
        }
        seen[id] = true;
        labels[id] = rows[r].second;
    }
    return labels;
}

}  // namespace hct
