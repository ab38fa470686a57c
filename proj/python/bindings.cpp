#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>

#include "hct/error.hpp"
#include "hct/evaluator.hpp"
#include "hct/feature_store.hpp"
#include "hct/hier_cluster.hpp"
#include "hct/metric_space.hpp"
#include "hct/pipeline.hpp"
#include "hct/triplet_loss.hpp"

namespace py = pybind11;
using namespace hct;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<Label, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
    if (a.ndim() != 2) throw py::value_error("expected a 2-d array");
    const auto rows = static_cast<std::size_t>(a.shape(0));
    const auto cols = static_cast<std::size_t>(a.shape(1));
    return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const Matrix& m) {
    Array out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

std::vector<Label> to_labels(const LabelArray& a) {
    if (a.ndim() != 1) throw py::value_error("expected a 1-d label array");
    return {a.data(), a.data() + a.shape(0)};
}

LabelArray to_label_array(const std::vector<Label>& v) {
    LabelArray out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

Array distances_to_array(const DistanceMatrix& d) {
    Array out({d.size(), d.size()});
    auto* p = out.mutable_data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto row = d.row(i);
        std::copy(row.begin(), row.end(), p + i * d.size());
    }
    return out;
}

DistanceMatrix array_to_distances(const Array& a) {
    if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw py::value_error("expected a square distance matrix");
    const auto n = static_cast<std::size_t>(a.shape(0));
    DistanceMatrix d(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) d.set(i, j, a.data()[i * n + j]);
    return d;
}

py::dict eval_dict(const EvalReport& r) {
    py::dict d;
    d["map"] = r.map;
    d["rank1"] = r.rank1;
    d["rank5"] = r.rank5;
    d["rank10"] = r.rank10;
    d["num_queries"] = r.num_queries;
    return d;
}

py::dict quality_dict(const LabelQualityReport& r) {
    py::dict d;
    d["pair_precision"] = r.pair_precision;
    d["pair_recall"] = r.pair_recall;
    d["pair_f1"] = r.pair_f1;
    d["purity"] = r.purity;
    d["num_clusters"] = r.num_clusters;
    d["tp_pairs"] = r.tp_pairs;
    d["fp_pairs"] = r.fp_pairs;
    d["fn_pairs"] = r.fn_pairs;
    return d;
}

py::tuple features_tuple(const FeatureMatrix& fm) {
    py::object labels = py::none();
    if (fm.true_labels) labels = to_label_array(*fm.true_labels);
    return py::make_tuple(to_array(fm.values), labels);
}

FeatureMatrix make_features(const Array& values, const std::optional<LabelArray>& labels) {
    FeatureMatrix fm{to_matrix(values), std::nullopt};
    if (labels) fm.true_labels = to_labels(*labels);
    fm.validate();
    return fm;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Hierarchical clustering with triplet fine-tuning";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<ScheduleError>(m, "ScheduleError", base.ptr());
    py::register_exception<SamplingError>(m, "SamplingError", base.ptr());
    py::register_exception<GradientSingularityError>(m, "GradientSingularityError", base.ptr());
    py::register_exception<TrainingError>(m, "TrainingError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<StageError>(m, "StageError", base.ptr());

    m.def(
        "generate_synthetic",
        [](std::size_t num_identities, std::size_t samples_per_identity, std::size_t feature_dim,
           double cluster_stddev, double centroid_scale, double hard_pair_fraction, double hard_pair_gap,
           double outlier_fraction, std::uint64_t seed) {
            SyntheticSpec spec;
            spec.num_identities = num_identities;
            spec.samples_per_identity = samples_per_identity;
            spec.feature_dim = feature_dim;
            spec.cluster_stddev = cluster_stddev;
            spec.centroid_scale = centroid_scale;
            spec.hard_pair_fraction = hard_pair_fraction;
            spec.hard_pair_gap = hard_pair_gap;
            spec.outlier_fraction = outlier_fraction;
            spec.seed = seed;
            return features_tuple(generate_synthetic(spec));
        },
        py::arg("num_identities") = 10, py::arg("samples_per_identity") = 10, py::arg("feature_dim") = 8,
        py::arg("cluster_stddev") = 1.0, py::arg("centroid_scale") = 10.0, py::arg("hard_pair_fraction") = 0.0,
        py::arg("hard_pair_gap") = 1.0, py::arg("outlier_fraction") = 0.0, py::arg("seed") = 0,
        "Returns (features, labels).");

    m.def(
        "load_features", [](const std::filesystem::path& path) { return features_tuple(load_features(path)); },
        py::arg("path"));
    m.def(
        "save_features",
        [](const Array& values, const std::optional<LabelArray>& labels, const std::filesystem::path& path) {
            save_features(make_features(values, labels), path);
        },
        py::arg("features"), py::arg("labels"), py::arg("path"));

    m.def(
        "pairwise_euclidean",
        [](const Array& x, unsigned threads) { return distances_to_array(pairwise_euclidean(to_matrix(x), threads)); },
        py::arg("features"), py::arg("threads") = 1);
    m.def(
        "pairwise_cosine_distance",
        [](const Array& q, const Array& g) { return to_array(pairwise_cosine_distance(to_matrix(q), to_matrix(g))); },
        py::arg("queries"), py::arg("gallery"));

    py::class_<MergeSchedule>(m, "MergeSchedule")
        .def(py::init(&MergeSchedule::make), py::arg("samples"), py::arg("merge_percent"), py::arg("steps"))
        .def_readonly("samples", &MergeSchedule::samples)
        .def_readonly("merge_percent", &MergeSchedule::merge_percent)
        .def_readonly("steps", &MergeSchedule::steps)
        .def_readonly("merges_per_step", &MergeSchedule::merges_per_step)
        .def("final_clusters", &MergeSchedule::final_clusters)
        .def("__repr__", [](const MergeSchedule& s) {
            return "MergeSchedule(samples=" + std::to_string(s.samples) + ", m=" + std::to_string(s.merges_per_step) +
                   ", steps=" + std::to_string(s.steps) + ")";
        });

    m.def(
        "run_clustering",
        [](const Array& dist, const MergeSchedule& schedule) {
            DistanceMatrix d = array_to_distances(dist);
            ClusterState state;
            {
                py::gil_scoped_release release;
                state = run_clustering(std::move(d), schedule);
            }
            return to_label_array(state.labels);
        },
        py::arg("distances"), py::arg("schedule"), "Pseudo labels after the scheduled merges.");

    m.def(
        "batch_hard_loss",
        [](const Array& embeddings, const LabelArray& labels, double margin) {
            const auto r = batch_hard_loss_and_gradient(to_matrix(embeddings), to_labels(labels), margin);
            return py::make_tuple(r.report.loss, to_array(r.gradient));
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("margin") = 0.5, "Returns (loss, gradient).");

    m.def(
        "evaluate_retrieval",
        [](const Array& q, const Array& g, const LabelArray& ql, const LabelArray& gl) {
            return eval_dict(evaluate_retrieval(to_matrix(q), to_matrix(g), to_labels(ql), to_labels(gl)));
        },
        py::arg("query"), py::arg("gallery"), py::arg("query_labels"), py::arg("gallery_labels"));

    m.def(
        "label_quality",
        [](const LabelArray& pseudo, const LabelArray& truth) {
            return quality_dict(label_quality(to_labels(pseudo), to_labels(truth)));
        },
        py::arg("pseudo_labels"), py::arg("true_labels"));

    m.def(
        "run_pipeline",
        [](const py::dict& config, const std::optional<Array>& values, const std::optional<LabelArray>& labels) {
            PipelineConfig cfg;
            const auto json = nlohmann::json::parse(py::str(py::module_::import("json").attr("dumps")(config))
                                                        .cast<std::string>());
            apply_config_json(cfg, json);
            PipelineResult result;
            if (values) {
                const auto fm = make_features(*values, labels);
                py::gil_scoped_release release;
                result = run_pipeline(cfg, fm);
            } else {
                py::gil_scoped_release release;
                result = run_pipeline(cfg);
            }
            py::list records;
            for (const auto& r : result.records) {
                py::dict d = eval_dict(r.eval);
                d.attr("update")(quality_dict(r.quality));
                d["iteration"] = r.iteration;
                d["clusters"] = r.clusters;
                d["mean_loss"] = r.mean_loss;
                d["seconds"] = r.seconds;
                records.append(d);
            }
            py::dict out;
            out["baseline"] = eval_dict(result.baseline);
            out["best_iteration"] = result.best_iteration;
            out["records"] = records;
            return out;
        },
        py::arg("config"), py::arg("features") = py::none(), py::arg("labels") = py::none(),
        "Runs the iterative pipeline. `config` uses the same keys as the JSON config file.");
}
