#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "hct/error.hpp"
#include "hct/evaluator.hpp"
#include "oracles.hpp"

using namespace hct;

namespace {

// Unit vectors at the given angles (radians) in the plane.
Matrix angles(const std::vector<double>& theta) {
    Matrix m(theta.size(), 2);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        m(i, 0) = std::cos(theta[i]);
        m(i, 1) = std::sin(theta[i]);
    }
    return m;
}

std::vector<Label> random_labels(std::mt19937_64& rng, std::size_t n, std::size_t c) {
    std::vector<Label> out(n);
    for (auto& l : out) l = static_cast<Label>(rng() % c);
    return out;
}

}  // namespace

TEST_CASE("retrieval on hand-checked rankings") {
    const auto q = angles({0.0});
    SUBCASE("perfect ranking") {
        const auto g = angles({0.1, 0.2, 1.0, 1.5});
        const std::vector<Label> ql{1}, gl{1, 1, 2, 3};
        const auto r = evaluate_retrieval(q, g, ql, gl);
        CHECK(r.map == 1.0);
        CHECK(r.rank1 == 1.0);
        CHECK(r.num_queries == 1);
    }
    SUBCASE("relevant items at ranks 2 and 4") {
        const auto g = angles({0.1, 0.2, 0.3, 0.4});
        const std::vector<Label> ql{1}, gl{2, 1, 3, 1};
        const auto r = evaluate_retrieval(q, g, ql, gl);
        CHECK(r.map == doctest::Approx((1.0 / 2 + 2.0 / 4) / 2));
        CHECK(r.rank1 == 0.0);
        CHECK(r.rank5 == 1.0);
    }
    SUBCASE("distance ties resolve by gallery index") {
        const auto g = angles({0.3, 0.3, 0.3});
        const std::vector<Label> ql{1}, gl{2, 2, 1};
        const auto r = evaluate_retrieval(q, g, ql, gl);
        CHECK(r.map == doctest::Approx(1.0 / 3));
        CHECK(r.rank1 == 0.0);
    }
    SUBCASE("first hit beyond rank 10") {
        std::vector<double> theta;
        std::vector<Label> gl;
        for (int i = 0; i < 12; ++i) {
            theta.push_back(0.01 * (i + 1));
            gl.push_back(i == 11 ? 1 : 2);
        }
        const auto r = evaluate_retrieval(q, angles(theta), std::vector<Label>{1}, gl);
        CHECK(r.rank10 == 0.0);
        CHECK(r.map == doctest::Approx(1.0 / 12));
    }
    SUBCASE("query labels missing from the gallery are named") {
        const auto g = angles({0.1, 0.2});
        const std::vector<Label> ql{7}, gl{1, 2};
        CHECK_THROWS_WITH_AS(evaluate_retrieval(q, g, ql, gl), doctest::Contains("7"), ValidationError);
    }
}

TEST_CASE("retrieval agrees with the explicit-rank oracle") {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t nq = 1 + rng() % 10, ng = 5 + rng() % 40, c = 1 + rng() % 6;
        auto g = oracle::random_matrix(rng, ng, 3);
        auto gl = random_labels(rng, ng, c);
        const auto q = oracle::random_matrix(rng, nq, 3);
        std::vector<Label> ql(nq);
        for (auto& l : ql) l = gl[rng() % ng];
        if (trial % 3 == 0) {
            // duplicated gallery rows create exact distance ties
            for (std::size_t j = 1; j < ng; j += 2)
                for (std::size_t k = 0; k < 3; ++k) g(j, k) = g(j - 1, k);
        }
        const auto got = evaluate_retrieval(q, g, ql, gl);
        const auto ref = oracle::retrieval(q, g, ql, gl);
        CHECK(std::abs(got.map - ref.map) <= 1e-12);
        CHECK(got.rank1 == ref.rank1);
        CHECK(got.rank5 == ref.rank5);
        CHECK(got.rank10 == ref.rank10);
        CHECK(got.rank1 <= got.rank5);
        CHECK(got.rank5 <= got.rank10);
        CHECK(got.map >= 0.0);
        CHECK(got.map <= 1.0);
    }
}

TEST_CASE("label quality on known partitions") {
    SUBCASE("exact match") {
        const std::vector<Label> t{0, 0, 1, 1, 2};
        const auto r = label_quality(std::vector<Label>{5, 5, 3, 3, 9}, t);
        CHECK(r.pair_precision == 1.0);
        CHECK(r.pair_recall == 1.0);
        CHECK(r.pair_f1 == 1.0);
        CHECK(r.purity == 1.0);
        CHECK(r.num_clusters == 3);
    }
    SUBCASE("all singletons") {
        const auto r = label_quality(std::vector<Label>{0, 1, 2, 3}, std::vector<Label>{0, 0, 1, 1});
        CHECK(r.pair_precision == 1.0);
        CHECK(r.pair_recall == 0.0);
        CHECK(r.pair_f1 == 0.0);
        CHECK(r.purity == 1.0);
    }
    SUBCASE("one big cluster") {
        const auto r = label_quality(std::vector<Label>{0, 0, 0, 0}, std::vector<Label>{0, 0, 1, 1});
        CHECK(r.tp_pairs == 2);
        CHECK(r.fp_pairs == 4);
        CHECK(r.fn_pairs == 0);
        CHECK(r.pair_precision == doctest::Approx(1.0 / 3));
        CHECK(r.pair_recall == 1.0);
        CHECK(r.pair_f1 == doctest::Approx(0.5));
        CHECK(r.purity == 0.5);
    }
    SUBCASE("size mismatch") {
        CHECK_THROWS_AS(label_quality(std::vector<Label>{0, 1}, std::vector<Label>{0}), ValidationError);
    }
}

TEST_CASE("label quality counts agree with direct pair enumeration") {
    std::mt19937_64 rng(62);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + rng() % 150;
        const auto pseudo = random_labels(rng, n, 1 + rng() % 20);
        const auto truth = random_labels(rng, n, 1 + rng() % 20);
        const auto r = label_quality(pseudo, truth);
        const auto ref = oracle::pair_counts(pseudo, truth);
        CHECK(r.tp_pairs == ref.tp);
        CHECK(r.fp_pairs == ref.fp);
        CHECK(r.fn_pairs == ref.fn);
        CHECK(ref.tp + ref.fp + ref.fn + ref.tn == n * (n - 1) / 2);
        CHECK(r.purity > 0.0);
        CHECK(r.purity <= 1.0);
    }
}

TEST_CASE("query/gallery split") {
    FeatureMatrix fm;
    std::mt19937_64 rng(63);
    fm.values = oracle::random_matrix(rng, 30, 2);
    fm.true_labels = std::vector<Label>(30);
    for (std::size_t i = 0; i < 30; ++i) (*fm.true_labels)[i] = static_cast<Label>(i % 6);
    const auto split = split_query_gallery(fm, 4);
    CHECK(split.query_ids.size() == 6);
    CHECK(split.gallery_ids.size() == 24);
    std::set<Label> query_set(split.query_labels.begin(), split.query_labels.end());
    CHECK(query_set.size() == 6);
    CHECK(std::is_sorted(split.query_ids.begin(), split.query_ids.end()));
    CHECK(std::is_sorted(split.gallery_ids.begin(), split.gallery_ids.end()));
    const auto again = split_query_gallery(fm, 4);
    CHECK(again.query_ids == split.query_ids);

    const auto r = evaluate_split(fm.values, split);
    CHECK(r.num_queries == 6);

    (*fm.true_labels)[5] = 99;  // a lone identity cannot be queried
    CHECK_THROWS_AS(split_query_gallery(fm, 4), ValidationError);
}

TEST_CASE("report_json is a flat object") {
    EvalReport e{0.5, 0.25, 0.75, 1.0, 4};
    LabelQualityReport q;
    q.pair_f1 = 0.125;
    const auto j = nlohmann::json::parse(report_json(e, q, 3));
    CHECK(j.at("iteration") == 3);
    CHECK(j.at("map") == 0.5);
    CHECK(j.at("pair_f1") == 0.125);
    for (const auto& [key, value] : j.items()) CHECK_FALSE(value.is_structured());
}

TEST_CASE("relevant items at ranks 1 and 3 give AP 5/6") {
    const auto q = angles({0.0});
    const auto g = angles({0.1, 0.2, 0.3});
    const auto r = evaluate_retrieval(q, g, std::vector<Label>{4}, std::vector<Label>{4, 1, 4});
    CHECK(r.map == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("retrieval reports are invariant to positive rescaling") {
    std::mt19937_64 rng(64);
    for (int trial = 0; trial < 10; ++trial) {
        const auto q = oracle::random_matrix(rng, 8, 4);
        const auto g = oracle::random_matrix(rng, 40, 4);
        const auto gl = random_labels(rng, 40, 5);
        std::vector<Label> ql(8);
        for (auto& l : ql) l = gl[rng() % 40];
        const double s = std::ldexp(1.0, static_cast<int>(rng() % 20) - 10);  // exact in binary
        Matrix qs = q, gs = g;
        for (auto& v : qs.data()) v *= s;
        for (auto& v : gs.data()) v *= s;
        const auto a = evaluate_retrieval(q, g, ql, gl);
        const auto b = evaluate_retrieval(qs, gs, ql, gl);
        CHECK(a.map == b.map);
        CHECK(a.rank1 == b.rank1);
        CHECK(a.rank10 == b.rank10);
    }
}

TEST_CASE("perfectly separated identities give mAP 1") {
    // each identity is a tight bundle around its own axis
    Matrix x(12, 4);
    std::vector<Label> labels(12);
    for (std::size_t i = 0; i < 12; ++i) {
        labels[i] = static_cast<Label>(i % 4);
        x(i, i % 4) = 1.0;
        x(i, (i + 1) % 4) = 0.01 * static_cast<double>(i / 4);
    }
    FeatureMatrix fm{x, labels};
    const auto r = evaluate_split(x, split_query_gallery(fm, 0));
    CHECK(r.map == 1.0);
    CHECK(r.rank1 == 1.0);
}

TEST_CASE("label quality is invariant to relabeling either side") {
    std::mt19937_64 rng(65);
    for (int trial = 0; trial < 10; ++trial) {
        const auto pseudo = random_labels(rng, 40, 8);
        const auto truth = random_labels(rng, 40, 6);
        std::vector<Label> perm_p(8), perm_t(6);
        std::iota(perm_p.begin(), perm_p.end(), Label{100});
        std::iota(perm_t.begin(), perm_t.end(), Label{-3});
        std::shuffle(perm_p.begin(), perm_p.end(), rng);
        std::shuffle(perm_t.begin(), perm_t.end(), rng);
        std::vector<Label> p2(40), t2(40);
        for (std::size_t i = 0; i < 40; ++i) {
            p2[i] = perm_p[static_cast<std::size_t>(pseudo[i])];
            t2[i] = perm_t[static_cast<std::size_t>(truth[i])];
        }
        const auto a = label_quality(pseudo, truth);
        const auto b = label_quality(p2, t2);
        CHECK(a.tp_pairs == b.tp_pairs);
        CHECK(a.fp_pairs == b.fp_pairs);
        CHECK(a.fn_pairs == b.fn_pairs);
        CHECK(a.purity == b.purity);
        CHECK(a.pair_f1 == b.pair_f1);
    }
}

TEST_CASE("two identities with two samples each") {
    FeatureMatrix fm{Matrix(4, 1, std::vector<double>{1, 2, 3, 4}), std::vector<Label>{0, 0, 1, 1}};
    const auto split = split_query_gallery(fm, 9);
    CHECK(split.query_ids.size() == 2);
    CHECK(split.gallery_ids.size() == 2);
    CHECK(split.query_labels == std::vector<Label>{0, 1});
    CHECK(split.gallery_labels == std::vector<Label>{0, 1});
}
