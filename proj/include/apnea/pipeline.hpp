#ifndef APNEA_PIPELINE_HPP
#define APNEA_PIPELINE_HPP

// Batch pipeline stages behind the CLI: ingest, feature extraction with
// a reconciliation report, stats, training, evaluation and the feature
// ablation. Stage artifacts land under output_dir with content-hash
// names so stages can be rerun independently; reruns over unchanged
// inputs produce byte-identical files.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "apnea/features.hpp"
#include "apnea/fir.hpp"
#include "apnea/metrics.hpp"
#include "apnea/model.hpp"
#include "apnea/peaks.hpp"

namespace apnea::pipeline {

struct PipelineConfig {
    std::filesystem::path dataset_dir;
    std::filesystem::path output_dir;
    double band_lo = 8.0;  // Hz; widen with --band (e.g. 8,20)
    double band_hi = 12.0;
    int fir_order = 100;
    RrBounds rr_bounds{};
    HamiltonConfig hamilton{};
    FeatureSet feature_set = FeatureSet::RAndS;
    int jobs = 1;

    // Canonical string of every knob that affects feature bytes.
    std::string feature_key() const;
};

// ---- ingest ----

struct RecordInventory {
    std::string record_id;
    bool ok = false;
    std::string error;
    int fs = 0;
    size_t n_samples = 0;
    double duration_s = 0.0;
    size_t n_labeled_minutes = 0;
    size_t dropped_labels = 0;
};

struct IngestResult {
    std::vector<RecordInventory> records;
    size_t n_ok = 0;
    size_t n_failed = 0;
};

IngestResult ingest(const std::filesystem::path& dataset_dir);
std::string render_ingest_text(const IngestResult& r);
std::string render_ingest_json(const IngestResult& r);

// ---- features ----

struct SplitFeatures {
    std::string split;  // "train" or "test"
    std::filesystem::path file;
    BuildReport report;
    size_t n_segments = 0;
    size_t n_sa = 0;
    size_t n_non_sa = 0;
};

struct FeatureRunResult {
    std::vector<SplitFeatures> splits;  // train first, test second when present
    std::vector<RecordInventory> failures;
    std::string input_key;

    const SplitFeatures* split(const std::string& name) const {
        for (const auto& s : splits)
            if (s.split == name) return &s;
        return nullptr;
    }
};

FeatureRunResult run_features(const PipelineConfig& cfg);
std::string render_features_text(const FeatureRunResult& r);
std::string render_features_json(const FeatureRunResult& r);

// ---- stats ----

struct ChannelClassStats {
    std::string channel;
    double mean_sa = 0.0;
    double mean_non_sa = 0.0;
    double pooled_std = 0.0;  // of per-segment means
    double separation = 0.0;  // (mean_non - mean_sa) / pooled_std
};

struct StatsResult {
    std::filesystem::path histogram_csv;
    std::filesystem::path summary_json;
    std::vector<ChannelClassStats> channels;
    size_t n_segments = 0;
};

// Histograms use 50 fixed bins over each channel's pooled range of
// pre-normalization values (reconstructed from the stored moments).
StatsResult run_stats(const std::filesystem::path& features_path,
                      const std::filesystem::path& out_dir);

// ---- train / eval ----

struct TrainOptions {
    nn::ModelConfig model{};
    nn::TrainConfig train{};
    double val_fraction = 0.2;  // record-level split of the training records
};

struct TrainRunResult {
    std::filesystem::path checkpoint;
    int best_epoch = 0;
    double best_val_f1 = 0.0;
    bool diverged = false;
    size_t n_train = 0;
    size_t n_val = 0;
};

TrainRunResult run_train(const std::filesystem::path& features_path,
                         const std::filesystem::path& checkpoint_path, TrainOptions opts);

MetricsReport run_eval(const std::filesystem::path& features_path,
                       const std::filesystem::path& checkpoint_path, double threshold = 0.5);

struct AblateRunResult {
    AblationTable table;
    std::filesystem::path report_json;
};

// Trains and evaluates both feature sets on the same segments. R-only
// inputs are derived as channel prefixes of the 4-channel features.
AblateRunResult run_ablate(const std::filesystem::path& train_features,
                           const std::filesystem::path& test_features,
                           const std::filesystem::path& out_dir, const TrainOptions& opts);

// R-only view of a 4-channel segment (channels 0-1, bit-exact prefix).
FeatureSegment take_r_only(const FeatureSegment& seg);

// Record-level validation split: every fifth distinct record id (sorted)
// goes to validation; falls back to a segment-level split when there are
// fewer than two records.
struct ValSplit {
    std::vector<FeatureSegment> train;
    std::vector<FeatureSegment> val;
    bool record_level = true;
};
ValSplit split_for_validation(std::vector<FeatureSegment> segments, double val_fraction);

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xCBF29CE484222325ull);

}  // namespace apnea::pipeline

#endif
