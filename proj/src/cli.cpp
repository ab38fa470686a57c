#include "hct/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "hct/embed_trainer.hpp"
#include "hct/error.hpp"
#include "hct/evaluator.hpp"
#include "hct/feature_store.hpp"
#include "hct/hier_cluster.hpp"
#include "hct/metric_space.hpp"
#include "hct/pipeline.hpp"

namespace hct {

namespace {

using nlohmann::ordered_json;

void emit_json(const ordered_json& j, const std::string& path) {
    if (!path.empty()) {
        const std::filesystem::path p(path);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        std::ofstream out(p);
        if (!out) throw Error("cannot write " + path);
        out << j.dump(2) << '\n';
    }
    std::cout << j.dump(2) << '\n';
}

ordered_json quality_json(const LabelQualityReport& q) {
    ordered_json j;
    j["pair_precision"] = q.pair_precision;
    j["pair_recall"] = q.pair_recall;
    j["pair_f1"] = q.pair_f1;
    j["purity"] = q.purity;
    j["num_clusters"] = q.num_clusters;
    j["tp_pairs"] = q.tp_pairs;
    j["fp_pairs"] = q.fp_pairs;
    j["fn_pairs"] = q.fn_pairs;
    return j;
}

EmbedModel model_or_identity(const std::string& path, std::size_t dim) {
    return path.empty() ? EmbedModel::make_identity(dim) : load_model(path);
}

// Config keys exposed as pipeline flags, with whether the value is a string.
const std::vector<std::pair<std::string, bool>> kPipelineKeys = {
    {"mp", false},          {"s", false},          {"t", false},          {"patience", false},
    {"p", false},           {"k", false},          {"lr", false},         {"momentum", false},
    {"weight_decay", false}, {"margin", false},    {"epochs", false},     {"model_kind", true},
    {"embed_dim", false},   {"hidden_dim", false}, {"seed", false},       {"features_path", true},
    {"out_dir", true},      {"threads", false},
};

}  // namespace

int cli_main(const std::vector<std::string>& args) {
    CLI::App app{"Hierarchical clustering with triplet fine-tuning on feature vectors"};
    app.require_subcommand(1);

    // gen-data
    SyntheticSpec spec;
    std::string gen_out;
    bool gen_no_labels = false;
    auto* gen = app.add_subcommand("gen-data", "Write a synthetic identity dataset as feature CSV");
    gen->add_option("--num-identities", spec.num_identities);
    gen->add_option("--samples-per-identity", spec.samples_per_identity);
    gen->add_option("--feature-dim", spec.feature_dim);
    gen->add_option("--stddev", spec.cluster_stddev);
    gen->add_option("--centroid-scale", spec.centroid_scale);
    gen->add_option("--hard-pair-fraction", spec.hard_pair_fraction);
    gen->add_option("--hard-pair-gap", spec.hard_pair_gap);
    gen->add_option("--outlier-fraction", spec.outlier_fraction);
    gen->add_option("--seed", spec.seed);
    gen->add_option("--out", gen_out, "Output CSV")->required();
    gen->add_flag("--no-labels", gen_no_labels, "Omit the label column");

    // cluster
    std::string cl_features, cl_model, cl_labels_out, cl_report;
    double cl_mp = 0.07;
    std::size_t cl_steps = 13;
    unsigned cl_threads = 1;
    auto* cluster = app.add_subcommand("cluster", "Hierarchical UPGMA clustering into pseudo labels");
    cluster->add_option("--features", cl_features)->required();
    cluster->add_option("--mp", cl_mp, "Merge percent in (0,1)");
    cluster->add_option("--s", cl_steps, "Merge steps");
    cluster->add_option("--model", cl_model, "Checkpoint used to embed features first");
    cluster->add_option("--threads", cl_threads);
    cluster->add_option("--labels-out", cl_labels_out, "Pseudo-label CSV");
    cluster->add_option("--report", cl_report, "Quality report JSON");

    // train
    std::string tr_features, tr_labels, tr_model_in, tr_model_out, tr_kind = "linear";
    TrainConfig tr_cfg;
    double tr_lr = 6e-5, tr_momentum = 0.9, tr_wd = 5e-4;
    auto* train = app.add_subcommand("train", "One round of triplet fine-tuning on given pseudo labels");
    train->add_option("--features", tr_features)->required();
    train->add_option("--labels", tr_labels, "Pseudo-label CSV")->required();
    train->add_option("--model-in", tr_model_in, "Start from this checkpoint");
    train->add_option("--model-out", tr_model_out)->required();
    train->add_option("--model-kind", tr_kind);
    train->add_option("--embed-dim", tr_cfg.embed_dim);
    train->add_option("--hidden-dim", tr_cfg.hidden_dim);
    train->add_option("--lr", tr_lr);
    train->add_option("--momentum", tr_momentum);
    train->add_option("--weight-decay", tr_wd);
    train->add_option("--margin", tr_cfg.margin);
    train->add_option("--epochs", tr_cfg.epochs);
    train->add_option("--p", tr_cfg.p);
    train->add_option("--k", tr_cfg.k);
    train->add_option("--seed", tr_cfg.seed);

    // eval
    std::string ev_features, ev_model, ev_labels, ev_out;
    std::uint64_t ev_seed = 1;
    auto* eval = app.add_subcommand("eval", "Retrieval metrics and optional pseudo-label quality");
    eval->add_option("--features", ev_features, "Feature CSV with a label column")->required();
    eval->add_option("--model", ev_model, "Checkpoint (identity map if omitted)");
    eval->add_option("--labels", ev_labels, "Pseudo-label CSV to score against the true labels");
    eval->add_option("--seed", ev_seed, "Query/gallery split seed");
    eval->add_option("--out", ev_out, "Report JSON");

    // pipeline
    std::string pl_config;
    bool pl_dump = false, pl_timing = false;
    std::map<std::string, std::string> pl_raw;
    auto* pipeline = app.add_subcommand("pipeline", "Full iterative clustering and fine-tuning run");
    pipeline->add_option("--config", pl_config, "Flat JSON config");
    for (const auto& [key, is_string] : kPipelineKeys) {
        std::string names = "--" + key;
        if (key.find('_') != std::string::npos) {
            auto dashed = key;
            std::replace(dashed.begin(), dashed.end(), '_', '-');
            names += ",--" + dashed;
        }
        pipeline->add_option(names, pl_raw[key]);
    }
    pipeline->add_flag("--dump-labels", pl_dump, "Write labels_iter{i}.csv");
    pipeline->add_flag("--record-timing", pl_timing, "Write wall time to records.csv");

    // report
    std::string rp_log, rp_out;
    auto* report = app.add_subcommand("report", "Turn records.csv into per-iteration plot series");
    report->add_option("--log", rp_log, "records.csv")->required();
    report->add_option("--out", rp_out, "Series JSON");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (gen->parsed()) {
            auto features = generate_synthetic(spec);
            if (gen_no_labels) features.true_labels.reset();
            save_features(features, gen_out);
            std::cerr << "wrote " << features.n() << " x " << features.d() << " features to " << gen_out << '\n';
        } else if (cluster->parsed()) {
            const auto features = load_features(cl_features);
            const auto model = model_or_identity(cl_model, features.d());
            const auto schedule = MergeSchedule::make(features.n(), cl_mp, cl_steps);
            auto dist = pairwise_euclidean(embed_all(model, features.values), std::max(1u, cl_threads));
            const auto state = run_clustering(std::move(dist), schedule);
            if (!cl_labels_out.empty()) save_pseudo_labels(state.labels, cl_labels_out);
            ordered_json j;
            j["samples"] = schedule.samples;
            j["merges_per_step"] = schedule.merges_per_step;
            j["steps"] = schedule.steps;
            j["num_clusters"] = state.cluster_count();
            if (features.has_labels()) j["quality"] = quality_json(label_quality(state.labels, *features.true_labels));
            emit_json(j, cl_report);
        } else if (train->parsed()) {
            const auto features = load_features(tr_features);
            const auto labels = load_pseudo_labels(tr_labels);
            if (labels.size() != features.n()) throw ValidationError("pseudo-label count differs from feature count");
            tr_cfg.model_kind = parse_model_kind(tr_kind);
            auto model = tr_model_in.empty()
                             ? EmbedModel::make(tr_cfg.model_kind, features.d(), tr_cfg.embed_dim, tr_cfg.hidden_dim,
                                                tr_cfg.seed)
                             : load_model(tr_model_in);
            auto opt = OptimizerState::for_model(model, tr_lr, tr_momentum, tr_wd);
            const auto result = train_epochs(std::move(model), features.values, labels, tr_cfg, opt);
            save_model(result.model, tr_model_out);
            ordered_json j;
            j["epoch_mean_loss"] = result.epoch_mean_loss;
            j["steps"] = result.steps;
            emit_json(j, "");
        } else if (eval->parsed()) {
            const auto features = load_features(ev_features);
            if (!features.has_labels()) throw ValidationError("eval needs a feature file with a label column");
            const auto model = model_or_identity(ev_model, features.d());
            const auto split = split_query_gallery(features, ev_seed);
            const auto r = evaluate_split(embed_all(model, features.values), split);
            ordered_json j;
            j["map"] = r.map;
            j["rank1"] = r.rank1;
            j["rank5"] = r.rank5;
            j["rank10"] = r.rank10;
            j["num_queries"] = r.num_queries;
            if (!ev_labels.empty()) {
                const auto pseudo = load_pseudo_labels(ev_labels);
                const auto quality = quality_json(label_quality(pseudo, *features.true_labels));
                for (const auto& [key, value] : quality.items()) j[key] = value;
            }
            emit_json(j, ev_out);
        } else if (pipeline->parsed()) {
            PipelineConfig cfg = pl_config.empty() ? PipelineConfig{} : load_pipeline_config(pl_config);
            nlohmann::json overrides = nlohmann::json::object();
            for (const auto& [key, is_string] : kPipelineKeys) {
                if (pipeline->get_option("--" + key)->count() == 0) continue;
                const auto& raw = pl_raw[key];
                if (is_string) {
                    overrides[key] = raw;
                } else {
                    try {
                        overrides[key] = nlohmann::json::parse(raw);
                    } catch (const nlohmann::json::parse_error&) {
                        throw ConfigError("flag --" + key + " has a malformed value '" + raw + "'");
                    }
                }
            }
            if (pl_dump) overrides["dump_labels"] = true;
            if (pl_timing) overrides["record_timing"] = true;
            apply_config_json(cfg, overrides);
            const auto result = run_pipeline(cfg);
            ordered_json j;
            j["iterations"] = result.records.size();
            j["best_iteration"] = result.best_iteration;
            j["best_map"] = result.records.empty() ? 0.0 : result.records[result.best_iteration].eval.map;
            j["baseline_map"] = result.baseline.map;
            emit_json(j, "");
        } else if (report->parsed()) {
            const auto records = load_records(rp_log);
            ordered_json j;
            std::vector<double> map, rank1, rank5, rank10, precision, recall, f1, purity, loss, seconds;
            std::vector<std::size_t> iteration, clusters;
            std::size_t best = 0;
            for (std::size_t i = 0; i < records.size(); ++i) {
                const auto& r = records[i];
                iteration.push_back(r.iteration);
                clusters.push_back(r.clusters);
                map.push_back(r.eval.map);
                rank1.push_back(r.eval.rank1);
                rank5.push_back(r.eval.rank5);
                rank10.push_back(r.eval.rank10);
                precision.push_back(r.quality.pair_precision);
                recall.push_back(r.quality.pair_recall);
                f1.push_back(r.quality.pair_f1);
                purity.push_back(r.quality.purity);
                loss.push_back(r.mean_loss);
                seconds.push_back(r.seconds);
                if (r.eval.map > records[best].eval.map) best = i;
            }
            j["iteration"] = iteration;
            j["clusters"] = clusters;
            j["map"] = map;
            j["rank1"] = rank1;
            j["rank5"] = rank5;
            j["rank10"] = rank10;
            j["pair_precision"] = precision;
            j["pair_recall"] = recall;
            j["pair_f1"] = f1;
            j["purity"] = purity;
            j["mean_loss"] = loss;
            j["seconds"] = seconds;
            if (!records.empty()) j["best_iteration"] = records[best].iteration;
            emit_json(j, rp_out);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace hct
