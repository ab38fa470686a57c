#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hct/embed_trainer.hpp"
#include "hct/evaluator.hpp"
#include "hct/feature_store.hpp"

namespace hct {

/// Flat configuration of a full clustering/fine-tuning run. Defaults suit a
/// dataset of ~13k samples; small synthetic sets usually want a larger lr.
struct PipelineConfig {
    double mp = 0.07;
    std::size_t s = 13;
    std::size_t t = 20;
    std::size_t patience = 5;  // 0 disables early stopping
    std::size_t p = 16;
    std::size_t k = 4;
    double lr = 6e-5;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double margin = 0.5;
    std::size_t epochs = 60;
    ModelKind model_kind = ModelKind::linear;
    std::size_t embed_dim = 0;   // 0: min(d, 32)
    std::size_t hidden_dim = 0;  // mlp1 only; 0: 2 * min(d, e)
    std::uint64_t seed = 0;
    std::filesystem::path features_path;
    std::filesystem::path out_dir;  // empty: no files written
    bool dump_labels = false;
    bool record_timing = false;  // false writes 0 in the seconds column
    unsigned threads = 1;

    void validate() const;

    /// Stage seeds derived from the master seed.
    std::uint64_t split_seed() const noexcept { return seed + 1; }
    std::uint64_t init_seed() const noexcept { return seed + 2; }
    std::uint64_t train_seed(std::size_t iteration) const noexcept { return seed + 1000 * (iteration + 1); }

    TrainConfig train_config(std::size_t iteration) const;

    nlohmann::ordered_json to_json() const;
};

/// Overrides fields from a flat JSON object. Relative paths resolve against
/// `base_dir`. Unknown keys and mistyped values raise ConfigError naming the key.
void apply_config_json(PipelineConfig& cfg, const nlohmann::json& j,
                       const std::filesystem::path& base_dir = {});

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct IterationRecord {
    std::size_t iteration = 0;
    std::size_t clusters = 0;
    EvalReport eval;
    LabelQualityReport quality;
    double mean_loss = 0.0;  // mean batch loss of the final epoch
    double seconds = 0.0;
};

struct IterationOutcome {
    EmbedModel model;
    IterationRecord record;
    std::vector<Label> pseudo_labels;
};

/// One pass: embed with the current model, cluster from singletons, train on
/// the resulting pseudo labels, then evaluate the trained model on `split`.
IterationOutcome run_iteration(const EmbedModel& model, const FeatureMatrix& features,
                               const QueryGallerySplit& split, const PipelineConfig& cfg, std::size_t iteration);

struct PipelineResult {
    EmbedModel best_model;
    std::size_t best_iteration = 0;
    EvalReport baseline;  // initial model, before any training
    std::vector<IterationRecord> records;
};

/// The model the pipeline starts from.
EmbedModel initial_model(const PipelineConfig& cfg, std::size_t input_dim);

/// Runs up to cfg.t iterations, stopping early once `patience` iterations
/// pass without a new best mAP. When out_dir is set, writes records.csv,
/// reports.jsonl, baseline.json, best_model.bin and optional label dumps.
PipelineResult run_pipeline(const PipelineConfig& cfg, const FeatureMatrix& features);
PipelineResult run_pipeline(const PipelineConfig& cfg);

inline constexpr const char* kRecordsHeader =
    "iteration,clusters,map,rank1,rank5,rank10,pair_precision,pair_recall,pair_f1,purity,mean_loss,seconds";

/// One records.csv row; reals are written so they read back exactly.
std::string format_record_row(const IterationRecord& record);

/// Reads records.csv back.
std::vector<IterationRecord> load_records(const std::filesystem::path& path);

}  // namespace hct
