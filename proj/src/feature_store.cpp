#include "hct/feature_store.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "csv_util.hpp"
#include "hct/error.hpp"

namespace hct {

namespace {

constexpr double kOutlierDisplacement = 5.0;

std::vector<double> random_unit_vector(std::mt19937_64& rng, std::size_t d) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> u(d);
    double norm = 0.0;
    do {
        for (auto& x : u) x = normal(rng);
        norm = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
    } while (norm == 0.0);
    for (auto& x : u) x /= norm;
    return u;
}

}  // namespace

void FeatureMatrix::validate() const {
    if (!values.all_finite()) throw ValidationError("feature matrix contains NaN or Inf");
    if (true_labels && true_labels->size() != values.rows()) {
        throw ValidationError("true label count does not match sample count");
    }
}

void SyntheticSpec::validate() const {
    if (num_identities == 0 || samples_per_identity == 0 || feature_dim == 0) {
        throw ValidationError("synthetic spec: counts and dimension must be positive");
    }
    if (!std::isfinite(cluster_stddev) || cluster_stddev < 0.0) {
        throw ValidationError("synthetic spec: cluster_stddev must be finite and non-negative");
    }
    if (!std::isfinite(centroid_scale) || centroid_scale <= 0.0) {
        throw ValidationError("synthetic spec: centroid_scale must be finite and positive");
    }
    if (!std::isfinite(hard_pair_fraction) || hard_pair_fraction < 0.0 || hard_pair_fraction > 1.0) {
        throw ValidationError("synthetic spec: hard_pair_fraction must lie in [0,1]");
    }
    if (!std::isfinite(hard_pair_gap) || hard_pair_gap < 0.0) {
        throw ValidationError("synthetic spec: hard_pair_gap must be finite and non-negative");
    }
    if (!std::isfinite(outlier_fraction) || outlier_fraction < 0.0 || outlier_fraction > 1.0) {
        throw ValidationError("synthetic spec: outlier_fraction must lie in [0,1]");
    }
    if (hard_identity_count() % 2 != 0) {
        throw ValidationError("synthetic spec: hard_pair_fraction * num_identities must round to an even count");
    }
}

std::size_t SyntheticSpec::hard_identity_count() const {
    return static_cast<std::size_t>(std::llround(hard_pair_fraction * static_cast<double>(num_identities)));
}

FeatureMatrix generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const std::size_t ids = spec.num_identities;
    const std::size_t per = spec.samples_per_identity;
    const std::size_t d = spec.feature_dim;
    const std::size_t n = ids * per;

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> uniform(-spec.centroid_scale, spec.centroid_scale);

    Matrix centroids(ids, d);
    for (auto& v : centroids.data()) v = uniform(rng);

    const std::size_t hard = spec.hard_identity_count();
    for (std::size_t a = 0; a + 1 < hard; a += 2) {
        const auto u = random_unit_vector(rng, d);
        const double gap = spec.hard_pair_gap * spec.cluster_stddev;
        for (std::size_t j = 0; j < d; ++j) centroids(a + 1, j) = centroids(a, j) + gap * u[j];
    }

    FeatureMatrix out;
    out.values = Matrix(n, d);
    out.true_labels = std::vector<Label>(n);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t id = i / per;
        (*out.true_labels)[i] = static_cast<Label>(id);
        auto row = out.values.row(i);
        for (std::size_t j = 0; j < d; ++j) row[j] = centroids(id, j) + spec.cluster_stddev * noise(rng);
    }

    const auto outliers = static_cast<std::size_t>(std::llround(spec.outlier_fraction * static_cast<double>(n)));
    if (outliers > 0) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(outliers));
        for (std::size_t k = 0; k < outliers; ++k) {
            const auto u = random_unit_vector(rng, d);
            auto row = out.values.row(order[k]);
            for (std::size_t j = 0; j < d; ++j) row[j] += kOutlierDisplacement * spec.cluster_stddev * u[j];
        }
    }
    return out;
}

FeatureMatrix load_features(const std::filesystem::path& path) {
    detail::LineReader reader(path);
    std::string line;
    if (!reader.next(line)) reader.fail("empty file, expected header");

    const auto header = detail::split_fields(line);
    if (header.empty() || header[0] != "id") reader.fail("header must start with 'id'");
    const bool has_label = header.size() > 1 && header[1] == "label";
    const std::size_t first_feature = has_label ? 2 : 1;
    const std::size_t d = header.size() - first_feature;
    if (d == 0) reader.fail("header declares no feature columns");
    for (std::size_t j = 0; j < d; ++j) {
        if (header[first_feature + j] != "f" + std::to_string(j)) {
            reader.fail("expected header column 'f" + std::to_string(j) + "', got '" +
                        std::string(header[first_feature + j]) + "'");
        }
    }

    struct Row {
        std::int64_t id;
        Label label;
        std::vector<double> values;
        std::size_t line;
    };
    std::vector<Row> rows;
    while (reader.next(line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_fields(line);
        if (fields.size() != header.size()) {
            reader.fail("expected " + std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));
        }
        Row row{0, 0, std::vector<double>(d), reader.line_no()};
        const auto id = detail::parse_int(fields[0]);
        if (!id || *id < 0) reader.fail("invalid id '" + std::string(fields[0]) + "'");
        row.id = *id;
        if (has_label) {
            const auto label = detail::parse_int(fields[1]);
            if (!label) reader.fail("invalid label '" + std::string(fields[1]) + "'");
            row.label = *label;
        }
        for (std::size_t j = 0; j < d; ++j) {
            const auto v = detail::parse_double(fields[first_feature + j]);
            if (!v || !std::isfinite(*v)) {
                reader.fail("non-numeric or non-finite value '" + std::string(fields[first_feature + j]) + "'");
            }
            row.values[j] = *v;
        }
        rows.push_back(std::move(row));
    }

    const std::size_t n = rows.size();
    FeatureMatrix out;
    out.values = Matrix(n, d);
    if (has_label) out.true_labels = std::vector<Label>(n);
    std::vector<bool> seen(n, false);
    for (const auto& row : rows) {
        const auto id = static_cast<std::size_t>(row.id);
        if (id >= n) throw ParseError(path.string(), row.line, "id " + std::to_string(row.id) + " out of range 0.." + std::to_string(n - 1));
        if (seen[id]) throw ParseError(path.string(), row.line, "duplicate id " + std::to_string(row.id));
        seen[id] = true;
        std::copy(row.values.begin(), row.values.end(), out.values.row(id).begin());
        if (has_label) (*out.true_labels)[id] = row.label;
    }
    return out;
}

void save_features(const FeatureMatrix& features, const std::filesystem::path& path) {
    features.validate();
    auto out = detail::open_for_write(path);
    out << "id";
    if (features.has_labels()) out << ",label";
    for (std::size_t j = 0; j < features.d(); ++j) out << ",f" << j;
    out << '\n';
    for (std::size_t i = 0; i < features.n(); ++i) {
        out << i;
        if (features.has_labels()) out << ',' << (*features.true_labels)[i];
        for (double v : features.values.row(i)) out << ',' << detail::format_double(v);
        out << '\n';
    }
    if (!out) throw Error("failed writing " + path.string());
}

}  // namespace hct
