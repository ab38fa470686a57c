#include "hct/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <string>

#include "csv_util.hpp"
#include "hct/error.hpp"
#include "hct/hier_cluster.hpp"
#include "hct/metric_space.hpp"

namespace hct {

namespace {

template <typename F>
auto run_stage(std::size_t iteration, const char* stage, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("iteration " + std::to_string(iteration) + ", stage '" + stage + "': " + e.what());
    }
}

template <typename T>
T get_as(const nlohmann::json& j, const std::string& key) {
    try {
        if constexpr (std::is_same_v<T, double>) {
            if (!j.is_number()) throw ConfigError("");
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!j.is_boolean()) throw ConfigError("");
        } else if constexpr (std::is_integral_v<T>) {
            if (!j.is_number_integer() || (j.is_number_integer() && j.get<std::int64_t>() < 0)) throw ConfigError("");
        } else {
            if (!j.is_string()) throw ConfigError("");
        }
        return j.get<T>();
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type or value: " + j.dump());
    }
}

}  // namespace

void PipelineConfig::validate() const {
    if (!(mp > 0.0 && mp < 1.0)) throw ValidationError("config: mp must lie in (0,1)");
    if (t < 1) throw ValidationError("config: t must be >= 1");
    if (threads < 1) throw ValidationError("config: threads must be >= 1");
    train_config(0).validate();
    OptimizerState opt;
    opt.lr = lr;
    opt.momentum = momentum;
    opt.weight_decay = weight_decay;
    opt.validate();
}

TrainConfig PipelineConfig::train_config(std::size_t iteration) const {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.margin = margin;
    tc.p = p;
    tc.k = k;
    tc.seed = train_seed(iteration);
    tc.model_kind = model_kind;
    tc.embed_dim = embed_dim;
    tc.hidden_dim = hidden_dim;
    return tc;
}

nlohmann::ordered_json PipelineConfig::to_json() const {
    nlohmann::ordered_json j;
    j["mp"] = mp;
    j["s"] = s;
    j["t"] = t;
    j["patience"] = patience;
    j["p"] = p;
    j["k"] = k;
    j["lr"] = lr;
    j["momentum"] = momentum;
    j["weight_decay"] = weight_decay;
    j["margin"] = margin;
    j["epochs"] = epochs;
    j["model_kind"] = std::string(to_string(model_kind));
    j["embed_dim"] = embed_dim;
    j["hidden_dim"] = hidden_dim;
    j["seed"] = seed;
    j["features_path"] = features_path.string();
    j["out_dir"] = out_dir.string();
    j["dump_labels"] = dump_labels;
    j["record_timing"] = record_timing;
    j["threads"] = threads;
    return j;
}

void apply_config_json(PipelineConfig& cfg, const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config must be a flat JSON object");
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return (path.empty() || path.is_absolute() || base_dir.empty()) ? path : base_dir / path;
    };
    for (const auto& [key, value] : j.items()) {
        if (key == "mp") cfg.mp = get_as<double>(value, key);
        else if (key == "s") cfg.s = get_as<std::size_t>(value, key);
        else if (key == "t") cfg.t = get_as<std::size_t>(value, key);
        else if (key == "patience") cfg.patience = get_as<std::size_t>(value, key);
        else if (key == "p") cfg.p = get_as<std::size_t>(value, key);
        else if (key == "k") cfg.k = get_as<std::size_t>(value, key);
        else if (key == "lr") cfg.lr = get_as<double>(value, key);
        else if (key == "momentum") cfg.momentum = get_as<double>(value, key);
        else if (key == "weight_decay") cfg.weight_decay = get_as<double>(value, key);
        else if (key == "margin") cfg.margin = get_as<double>(value, key);
        else if (key == "epochs") cfg.epochs = get_as<std::size_t>(value, key);
        else if (key == "model_kind") {
            try {
                cfg.model_kind = parse_model_kind(get_as<std::string>(value, key));
            } catch (const ValidationError& e) {
                throw ConfigError("config key 'model_kind': " + std::string(e.what()));
            }
        }
        else if (key == "embed_dim") cfg.embed_dim = get_as<std::size_t>(value, key);
        else if (key == "hidden_dim") cfg.hidden_dim = get_as<std::size_t>(value, key);
        else if (key == "seed") cfg.seed = get_as<std::uint64_t>(value, key);
        else if (key == "features_path") cfg.features_path = resolve(get_as<std::string>(value, key));
        else if (key == "out_dir") cfg.out_dir = resolve(get_as<std::string>(value, key));
        else if (key == "dump_labels") cfg.dump_labels = get_as<bool>(value, key);
        else if (key == "record_timing") cfg.record_timing = get_as<bool>(value, key);
        else if (key == "threads") cfg.threads = static_cast<unsigned>(get_as<std::size_t>(value, key));
        else throw ConfigError("unknown config key '" + key + "'");
    }
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("malformed config " + path.string() + ": " + e.what());
    }
    PipelineConfig cfg;
    apply_config_json(cfg, j, path.parent_path());
    return cfg;
}

EmbedModel initial_model(const PipelineConfig& cfg, std::size_t input_dim) {
    return EmbedModel::make(cfg.model_kind, input_dim, cfg.embed_dim, cfg.hidden_dim, cfg.init_seed());
}

IterationOutcome run_iteration(const EmbedModel& model, const FeatureMatrix& features,
                               const QueryGallerySplit& split, const PipelineConfig& cfg, std::size_t iteration) {
    const auto start = std::chrono::steady_clock::now();
    IterationOutcome out;
    out.record.iteration = iteration;

    auto embeddings = run_stage(iteration, "extract", [&] { return embed_all(model, features.values); });
    auto dist = run_stage(iteration, "distance", [&] { return pairwise_euclidean(embeddings, cfg.threads); });
    const auto state = run_stage(iteration, "cluster", [&] {
        const auto schedule = MergeSchedule::make(features.n(), cfg.mp, cfg.s);
        return run_clustering(std::move(dist), schedule);
    });
    out.record.clusters = state.cluster_count();
    if (features.has_labels()) {
        out.record.quality = run_stage(iteration, "label-quality",
                                       [&] { return label_quality(state.labels, *features.true_labels); });
    } else {
        out.record.quality.num_clusters = state.cluster_count();
    }

    auto trained = run_stage(iteration, "train", [&] {
        auto opt = OptimizerState::for_model(model, cfg.lr, cfg.momentum, cfg.weight_decay);
        return train_epochs(model, features.values, state, cfg.train_config(iteration), opt);
    });
    out.record.mean_loss = trained.epoch_mean_loss.empty() ? 0.0 : trained.epoch_mean_loss.back();
    out.model = std::move(trained.model);

    out.record.eval = run_stage(iteration, "evaluate",
                                [&] { return evaluate_split(embed_all(out.model, features.values), split); });
    out.pseudo_labels = state.labels;
    if (cfg.record_timing) {
        out.record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    return out;
}

std::string format_record_row(const IterationRecord& r) {
    auto f = [](double v) { return detail::format_double(v); };
    return std::to_string(r.iteration) + ',' + std::to_string(r.clusters) + ',' + f(r.eval.map) + ',' +
           f(r.eval.rank1) + ',' + f(r.eval.rank5) + ',' + f(r.eval.rank10) + ',' + f(r.quality.pair_precision) +
           ',' + f(r.quality.pair_recall) + ',' + f(r.quality.pair_f1) + ',' + f(r.quality.purity) + ',' +
           f(r.mean_loss) + ',' + f(r.seconds);
}

std::vector<IterationRecord> load_records(const std::filesystem::path& path) {
    detail::LineReader reader(path);
    std::string line;
    if (!reader.next(line) || line != kRecordsHeader) reader.fail("unexpected records.csv header");
    std::vector<IterationRecord> out;
    while (reader.next(line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_fields(line);
        if (fields.size() != 12) reader.fail("expected 12 fields");
        std::vector<double> v;
        for (std::size_t i = 2; i < fields.size(); ++i) {
            const auto x = detail::parse_double(fields[i]);
            if (!x) reader.fail("non-numeric field '" + std::string(fields[i]) + "'");
            v.push_back(*x);
        }
        const auto it = detail::parse_int(fields[0]);
        const auto c = detail::parse_int(fields[1]);
        if (!it || !c || *it < 0 || *c < 0) reader.fail("invalid iteration or cluster count");
        IterationRecord r;
        r.iteration = static_cast<std::size_t>(*it);
        r.clusters = static_cast<std::size_t>(*c);
        r.eval = EvalReport{v[0], v[1], v[2], v[3], 0};
        r.quality.pair_precision = v[4];
        r.quality.pair_recall = v[5];
        r.quality.pair_f1 = v[6];
        r.quality.purity = v[7];
        r.quality.num_clusters = r.clusters;
        r.mean_loss = v[8];
        r.seconds = v[9];
        out.push_back(r);
    }
    return out;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const FeatureMatrix& features) {
    cfg.validate();
    features.validate();
    if (!features.has_labels()) throw ValidationError("pipeline evaluation needs ground-truth labels");

    const bool write = !cfg.out_dir.empty();
    std::ofstream records_csv;
    std::ofstream reports_jsonl;
    if (write) {
        records_csv = detail::open_for_write(cfg.out_dir / "records.csv");
        reports_jsonl = detail::open_for_write(cfg.out_dir / "reports.jsonl");
        records_csv << kRecordsHeader << '\n';
        auto cfg_out = detail::open_for_write(cfg.out_dir / "config.json");
        cfg_out << cfg.to_json().dump(2) << '\n';
    }

    const auto split = split_query_gallery(features, cfg.split_seed());
    EmbedModel model = initial_model(cfg, features.d());

    PipelineResult result;
    result.baseline = evaluate_split(embed_all(model, features.values), split);
    result.best_model = model;
    if (write) {
        auto out = detail::open_for_write(cfg.out_dir / "baseline.json");
        nlohmann::ordered_json j;
        j["map"] = result.baseline.map;
        j["rank1"] = result.baseline.rank1;
        j["rank5"] = result.baseline.rank5;
        j["rank10"] = result.baseline.rank10;
        out << j.dump() << '\n';
    }

    double best_map = -1.0;
    for (std::size_t it = 0; it < cfg.t; ++it) {
        auto outcome = run_iteration(model, features, split, cfg, it);
        const auto& rec = outcome.record;
        std::clog << "[hct] iteration " << it << ": clusters=" << rec.clusters << " mAP=" << rec.eval.map
                  << " rank1=" << rec.eval.rank1 << " pair_f1=" << rec.quality.pair_f1
                  << " loss=" << rec.mean_loss << '\n';
        if (write) {
            records_csv << format_record_row(rec) << '\n' << std::flush;
            reports_jsonl << report_json(rec.eval, rec.quality, it) << '\n' << std::flush;
            if (cfg.dump_labels) {
                save_pseudo_labels(outcome.pseudo_labels, cfg.out_dir / ("labels_iter" + std::to_string(it) + ".csv"));
            }
        }
        if (rec.eval.map > best_map) {
            best_map = rec.eval.map;
            result.best_iteration = it;
            result.best_model = outcome.model;
            if (write) save_model(result.best_model, cfg.out_dir / "best_model.bin");
        }
        result.records.push_back(rec);
        model = std::move(outcome.model);
        if (cfg.patience > 0 && it - result.best_iteration >= cfg.patience) break;
    }
    return result;
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    if (cfg.features_path.empty()) throw ConfigError("config key 'features_path' is required");
    return run_pipeline(cfg, load_features(cfg.features_path));
}

}  // namespace hct
