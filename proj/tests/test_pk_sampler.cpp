#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "hct/error.hpp"
#include "hct/pk_sampler.hpp"
#include "oracles.hpp"

using namespace hct;

namespace {

std::vector<Label> random_partition(std::mt19937_64& rng, std::size_t n, std::size_t c) {
    // every label used at least once
    std::vector<Label> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<Label>(i < c ? i : rng() % c);
    std::shuffle(labels.begin(), labels.end(), rng);
    return labels;
}

void check_plan_shape(const BatchPlan& plan, const std::vector<Label>& labels) {
    for (const auto& batch : plan.batches) {
        REQUIRE(batch.entries.size() == plan.p);
        std::set<Label> distinct;
        for (const auto& entry : batch.entries) {
            distinct.insert(entry.pseudo_label);
            REQUIRE(entry.samples.size() == plan.k);
            for (auto idx : entry.samples) CHECK(labels[idx] == entry.pseudo_label);
        }
        CHECK(distinct.size() == plan.p);
    }
}

}  // namespace

TEST_CASE("batches hold P x K slots") {
    std::mt19937_64 rng(31);
    const auto labels = random_partition(rng, 400, 70);
    const auto plan = build_epoch_plan(labels, 16, 4, 5);
    CHECK(plan.batches.size() == 70 / 16);
    check_plan_shape(plan, labels);
    for (const auto& batch : plan.batches) {
        std::size_t slots = 0;
        for (const auto& e : batch.entries) slots += e.samples.size();
        CHECK(slots == 64);
    }
}

TEST_CASE("small clusters are filled with replacement") {
    // cluster 0 has two members; every other cluster has plenty
    std::vector<Label> labels{0, 0};
    for (Label c = 1; c < 4; ++c)
        for (int i = 0; i < 6; ++i) labels.push_back(c);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto plan = build_epoch_plan(labels, 4, 4, seed);
        REQUIRE(plan.batches.size() == 1);
        for (const auto& entry : plan.batches[0].entries) {
            std::set<std::size_t> unique(entry.samples.begin(), entry.samples.end());
            if (entry.pseudo_label == 0) {
                CHECK(unique == std::set<std::size_t>{0, 1});
            } else {
                CHECK(unique.size() == 4);  // without replacement
            }
        }
    }
}

TEST_CASE("singleton clusters repeat their only sample") {
    std::vector<Label> labels{0, 1, 2, 3};
    const auto plan = build_epoch_plan(labels, 2, 3, 1);
    REQUIRE(plan.batches.size() == 2);
    for (const auto& batch : plan.batches)
        for (const auto& entry : batch.entries)
            CHECK(entry.samples == std::vector<std::size_t>(3, static_cast<std::size_t>(entry.pseudo_label)));
}

TEST_CASE("epoch coverage: 40 identities, P = 8") {
    std::mt19937_64 rng(32);
    const auto labels = random_partition(rng, 300, 40);
    const auto plan = build_epoch_plan(labels, 8, 4, 9);
    CHECK(plan.batches.size() == 5);
    std::map<Label, int> appearances;
    for (const auto& b : plan.batches)
        for (const auto& e : b.entries) ++appearances[e.pseudo_label];
    CHECK(appearances.size() == 40);
    for (const auto& [label, count] : appearances) CHECK(count == 1);
}

TEST_CASE("leftover identities are dropped and at most one batch per identity") {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t c = 10 + rng() % 40;
        const std::size_t p = 2 + rng() % 8;
        const auto labels = random_partition(rng, 3 * c, c);
        const auto plan = build_epoch_plan(labels, p, 3, rng());
        check_plan_shape(plan, labels);
        std::set<Label> seen;
        std::size_t total = 0;
        for (const auto& b : plan.batches)
            for (const auto& e : b.entries) {
                seen.insert(e.pseudo_label);
                ++total;
            }
        CHECK(total == seen.size());
        CHECK(total == (c / p) * p);
    }
}

TEST_CASE("plans are deterministic under a fixed seed") {
    std::mt19937_64 rng(34);
    const auto labels = random_partition(rng, 200, 30);
    const auto a = build_epoch_plan(labels, 4, 4, 77);
    const auto b = build_epoch_plan(labels, 4, 4, 77);
    REQUIRE(a.batches.size() == b.batches.size());
    for (std::size_t i = 0; i < a.batches.size(); ++i)
        for (std::size_t j = 0; j < a.batches[i].entries.size(); ++j) {
            CHECK(a.batches[i].entries[j].pseudo_label == b.batches[i].entries[j].pseudo_label);
            CHECK(a.batches[i].entries[j].samples == b.batches[i].entries[j].samples);
        }
}

TEST_CASE("identity-starved epochs are rejected") {
    std::vector<Label> labels{0, 0, 1, 1, 2};
    CHECK_THROWS_AS(build_epoch_plan(labels, 4, 2, 0), SamplingError);
}

TEST_CASE("materialize_batch gathers rows in plan order") {
    std::mt19937_64 rng(35);
    const auto x = oracle::random_matrix(rng, 50, 6);
    SUBCASE("known indices") {
        Batch batch;
        batch.entries.push_back({7, {3, 9}});
        batch.entries.push_back({2, {0, 0}});
        const auto [rows, labels] = materialize_batch(batch, x);
        REQUIRE(rows.rows() == 4);
        CHECK(labels == std::vector<Label>{7, 7, 2, 2});
        const std::size_t expect[] = {3, 9, 0, 0};
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t j = 0; j < 6; ++j) CHECK(rows(r, j) == x(expect[r], j));
    }
    SUBCASE("random plan against a scalar gather") {
        const auto part = random_partition(rng, 50, 12);
        const auto plan = build_epoch_plan(part, 4, 3, 8);
        for (const auto& batch : plan.batches) {
            const auto [rows, labels] = materialize_batch(batch, x);
            std::size_t r = 0;
            std::map<Label, int> counts;
            for (const auto& e : batch.entries)
                for (auto idx : e.samples) {
                    for (std::size_t j = 0; j < 6; ++j) CHECK(rows(r, j) == x(idx, j));
                    CHECK(labels[r] == e.pseudo_label);
                    ++counts[labels[r]];
                    ++r;
                }
            CHECK(counts.size() == 4);
            for (const auto& [l, c] : counts) CHECK(c == 3);
        }
    }
}
