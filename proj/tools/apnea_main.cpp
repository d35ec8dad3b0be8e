// Batch CLI for the sleep-apnea detection pipeline: dataset ingest,
// synthetic fixtures, feature extraction, stats, training, evaluation
// and the R vs R+S feature ablation.
//
// Exit codes: 0 success, 1 partial failure (some records), 2 fatal
// configuration error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "apnea/binio.hpp"
#include "apnea/config.hpp"
#include "apnea/feature_file.hpp"
#include "apnea/fir.hpp"
#include "apnea/metrics.hpp"
#include "apnea/model.hpp"
#include "apnea/peaks.hpp"
#include "apnea/pipeline.hpp"
#include "apnea/synth.hpp"
#include "apnea/wfdb.hpp"

namespace fs = std::filesystem;
using namespace apnea;

namespace {

struct GlobalOpts {
    std::string config_path;
    int jobs = 1;
    uint64_t seed = 1;
};

// --config values become defaults; explicit flags still win.
void apply_config_defaults(const TomlConfig& cfg, pipeline::PipelineConfig& pc,
                           pipeline::TrainOptions& topts) {
    if (auto v = cfg.get_double_array("filter.band"); v && v->size() == 2) {
        pc.band_lo = (*v)[0];
        pc.band_hi = (*v)[1];
    }
    if (auto v = cfg.get_int("filter.order")) pc.fir_order = static_cast<int>(*v);
    if (auto v = cfg.get_double("rr.min")) pc.rr_bounds.rr_min = *v;
    if (auto v = cfg.get_double("rr.max")) pc.rr_bounds.rr_max = *v;
    if (auto v = cfg.get_int("rr.window")) pc.rr_bounds.window = static_cast<int>(*v);
    if (auto v = cfg.get_string("features.feature_set"))
        pc.feature_set = (*v == "r") ? FeatureSet::ROnly : FeatureSet::RAndS;
    if (auto v = cfg.get_int("train.epochs")) topts.train.epochs = static_cast<int>(*v);
    if (auto v = cfg.get_int("train.batch_size")) topts.train.batch_size = static_cast<int>(*v);
    if (auto v = cfg.get_double("train.lr")) topts.train.learning_rate = *v;
    if (auto v = cfg.get_int("train.seed")) topts.train.seed = static_cast<uint64_t>(*v);
    if (auto v = cfg.get_double("train.val_fraction")) topts.val_fraction = *v;
    if (auto v = cfg.get_int("model.blocks")) topts.model.n_blocks = static_cast<int>(*v);
    if (auto v = cfg.get_int("model.width")) topts.model.width = static_cast<int>(*v);
    if (auto v = cfg.get_int("model.cardinality")) topts.model.cardinality = static_cast<int>(*v);
    if (auto v = cfg.get_int("model.se_reduction"))
        topts.model.se_reduction = static_cast<int>(*v);
}

bool parse_band(const std::string& text, double& lo, double& hi) {
    size_t comma = text.find(',');
    if (comma == std::string::npos) return false;
    try {
        lo = std::stod(text.substr(0, comma));
        hi = std::stod(text.substr(comma + 1));
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path, std::vector<uint8_t>(text.begin(), text.end()));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Single-lead ECG sleep-apnea detection pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOpts gopts;
    pipeline::PipelineConfig pc;
    pipeline::TrainOptions topts;

    // Pre-scan for --config so file values become defaults under the flags.
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") gopts.config_path = argv[i + 1];
    if (!gopts.config_path.empty()) {
        try {
            apply_config_defaults(TomlConfig::parse_file(gopts.config_path), pc, topts);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
    }

    app.add_option("--config", gopts.config_path, "TOML config file");
    app.add_option("--jobs", gopts.jobs, "record-level worker count")->capture_default_str();
    app.add_option("--seed", gopts.seed, "global RNG seed")->capture_default_str();

    std::string band_text;
    std::string feature_set_text = pc.feature_set == FeatureSet::ROnly ? "r" : "rs";

    // ---- ingest ----
    auto* c_ingest = app.add_subcommand("ingest", "inventory a WFDB dataset directory");
    c_ingest->fallthrough();
    std::string ingest_dir, ingest_json;
    c_ingest->add_option("dataset", ingest_dir, "dataset directory")->required();
    c_ingest->add_option("--json", ingest_json, "write JSON inventory here");

    // ---- synth ----
    auto* c_synth = app.add_subcommand("synth", "generate synthetic WFDB fixtures");
    c_synth->fallthrough();
    std::string synth_out, synth_id = "a01", synth_truth_csv;
    int synth_minutes = 0;
    double synth_duration = 60.0, synth_bpm = 60.0, synth_r_amp = 1.0, synth_s_amp = 0.4;
    double sa_r_amp = 0.6, sa_s_amp = 0.55, sa_bpm = 75.0, non_r_amp = 1.0, non_s_amp = 0.35,
           non_bpm = 60.0;
    double synth_snr = 0.0, match_tol_ms = 40.0;
    bool synth_eval_detection = false;
    int synth_fmt = 16;
    c_synth->add_option("--out", synth_out, "output directory")->required();
    c_synth->add_option("--record-id", synth_id, "record id")->capture_default_str();
    c_synth->add_option("--labeled-minutes", synth_minutes,
                        "emit an alternating SA/non-SA labeled record of this many minutes");
    c_synth->add_option("--duration", synth_duration, "unlabeled record duration in seconds")
        ->capture_default_str();
    c_synth->add_option("--bpm", synth_bpm, "heart rate")->capture_default_str();
    c_synth->add_option("--r-amp", synth_r_amp, "R amplitude in mV")->capture_default_str();
    c_synth->add_option("--s-amp", synth_s_amp, "S amplitude in mV")->capture_default_str();
    c_synth->add_option("--sa-r-amp", sa_r_amp, "SA-minute R amplitude")->capture_default_str();
    c_synth->add_option("--sa-s-amp", sa_s_amp, "SA-minute S amplitude")->capture_default_str();
    c_synth->add_option("--sa-bpm", sa_bpm, "SA-minute heart rate")->capture_default_str();
    c_synth->add_option("--non-r-amp", non_r_amp, "non-SA R amplitude")->capture_default_str();
    c_synth->add_option("--non-s-amp", non_s_amp, "non-SA S amplitude")->capture_default_str();
    c_synth->add_option("--non-bpm", non_bpm, "non-SA heart rate")->capture_default_str();
    c_synth->add_option("--noise-snr", synth_snr, "additive noise SNR in dB (0 = clean)")
        ->capture_default_str();
    c_synth->add_option("--fmt", synth_fmt, "WFDB storage format (212 or 16)")
        ->capture_default_str();
    c_synth->add_option("--truth-csv", synth_truth_csv, "write ground-truth beat indices here");
    c_synth->add_flag("--eval-detection", synth_eval_detection,
                      "run the detector against the generated truth and print Table-style counts");
    c_synth->add_option("--match-tol-ms", match_tol_ms, "matching tolerance for --eval-detection")
        ->capture_default_str();

    // ---- features ----
    auto* c_features = app.add_subcommand("features", "extract labeled feature segments");
    c_features->fallthrough();
    std::string features_dataset, features_out, features_json;
    bool features_csv = false;
    c_features->add_option("--dataset", features_dataset, "dataset directory")->required();
    c_features->add_option("--out", features_out, "output directory")->required();
    c_features->add_option("--band", band_text, "band edges lo,hi in Hz (default 8,12)");
    c_features->add_option("--fir-order", pc.fir_order, "FIR order")->capture_default_str();
    c_features->add_option("--rr-min", pc.rr_bounds.rr_min, "RR lower bound, s")
        ->capture_default_str();
    c_features->add_option("--rr-max", pc.rr_bounds.rr_max, "RR upper bound, s")
        ->capture_default_str();
    c_features->add_option("--rr-window", pc.rr_bounds.window, "RR median window (odd)")
        ->capture_default_str();
    c_features->add_option("--feature-set", feature_set_text, "r | rs")->capture_default_str();
    bool drop_boundary = true;
    c_features
        ->add_flag("--drop-boundary,!--no-drop-boundary", drop_boundary,
                   "drop minutes lacking the full 2-minute context (padding is not implemented)")
        ->capture_default_str();
    c_features->add_option("--json", features_json, "write the reconciliation report here");
    c_features->add_flag("--csv", features_csv, "also export segments as CSV");

    // ---- stats ----
    auto* c_stats = app.add_subcommand("stats", "per-class feature histograms");
    c_stats->fallthrough();
    std::string stats_features, stats_out;
    c_stats->add_option("--features", stats_features, "feature file")->required();
    c_stats->add_option("--out", stats_out, "output directory")->required();

    // ---- train ----
    auto* c_train = app.add_subcommand("train", "train the SE-CNN classifier");
    c_train->fallthrough();
    std::string train_features, train_out = "model.apnc";
    c_train->add_option("--features", train_features, "training feature file")->required();
    c_train->add_option("--out", train_out, "checkpoint path")->capture_default_str();
    c_train->add_option("--epochs", topts.train.epochs)->capture_default_str();
    c_train->add_option("--batch-size", topts.train.batch_size)->capture_default_str();
    c_train->add_option("--lr", topts.train.learning_rate)->capture_default_str();
    c_train->add_option("--val-frac", topts.val_fraction)->capture_default_str();
    c_train->add_option("--blocks", topts.model.n_blocks)->capture_default_str();
    c_train->add_option("--width", topts.model.width)->capture_default_str();
    c_train->add_option("--cardinality", topts.model.cardinality)->capture_default_str();
    c_train->add_option("--se-reduction", topts.model.se_reduction)->capture_default_str();

    // ---- eval ----
    auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on a feature file");
    c_eval->fallthrough();
    std::string eval_features, eval_model, eval_json;
    double eval_threshold = 0.5;
    c_eval->add_option("--features", eval_features, "feature file")->required();
    c_eval->add_option("--model", eval_model, "checkpoint path")->required();
    c_eval->add_option("--threshold", eval_threshold, "SA probability threshold")
        ->capture_default_str();
    c_eval->add_option("--json", eval_json, "write the JSON report here");

    // ---- ablate ----
    auto* c_ablate = app.add_subcommand("ablate", "compare R-only vs R+S feature sets");
    c_ablate->fallthrough();
    std::string ab_train, ab_test, ab_out;
    c_ablate->add_option("--train-features", ab_train, "4-channel training features")->required();
    c_ablate->add_option("--test-features", ab_test, "4-channel test features")->required();
    c_ablate->add_option("--out", ab_out, "output directory")->required();
    c_ablate->add_option("--epochs", topts.train.epochs)->capture_default_str();
    c_ablate->add_option("--batch-size", topts.train.batch_size)->capture_default_str();
    c_ablate->add_option("--lr", topts.train.learning_rate)->capture_default_str();
    c_ablate->add_option("--val-frac", topts.val_fraction)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    topts.train.seed = gopts.seed;
    pc.jobs = gopts.jobs;
    if (!band_text.empty() && !parse_band(band_text, pc.band_lo, pc.band_hi)) {
        std::cerr << "error: --band expects lo,hi\n";
        return 2;
    }
    if (feature_set_text == "r")
        pc.feature_set = FeatureSet::ROnly;
    else if (feature_set_text == "rs")
        pc.feature_set = FeatureSet::RAndS;
    else {
        std::cerr << "error: --feature-set must be r or rs\n";
        return 2;
    }

    try {
        if (*c_ingest) {
            pipeline::IngestResult r = pipeline::ingest(ingest_dir);
            std::cout << pipeline::render_ingest_text(r);
            if (!ingest_json.empty()) write_text(ingest_json, pipeline::render_ingest_json(r));
            return r.n_failed ? 1 : 0;
        }

        if (*c_synth) {
            SynthResult sr;
            if (synth_minutes > 0) {
                SynthSpec sa;
                sa.heart_rate_bpm = sa_bpm;
                sa.r_amp_mv = sa_r_amp;
                sa.s_amp_mv = sa_s_amp;
                sa.seed = gopts.seed;
                SynthSpec non;
                non.heart_rate_bpm = non_bpm;
                non.r_amp_mv = non_r_amp;
                non.s_amp_mv = non_s_amp;
                non.seed = gopts.seed + 1;
                if (synth_snr > 0) {
                    sa.noise_snr_db = synth_snr;
                    non.noise_snr_db = synth_snr;
                }
                sr = generate_labeled_pair(sa, non, synth_minutes);
            } else {
                SynthSpec spec;
                spec.duration_s = synth_duration;
                spec.heart_rate_bpm = synth_bpm;
                spec.r_amp_mv = synth_r_amp;
                spec.s_amp_mv = synth_s_amp;
                spec.seed = gopts.seed;
                if (synth_snr > 0) spec.noise_snr_db = synth_snr;
                sr = generate(spec);
            }
            sr.record.record_id = synth_id;
            write_record(synth_out, sr.record, synth_fmt);
            std::cout << "wrote " << synth_id << ": " << sr.record.samples.size() << " samples, "
                      << sr.truth.r_idx.size() << " beats, " << sr.record.labels.size()
                      << " labeled minutes\n";

            if (!synth_truth_csv.empty()) {
                std::string csv = "beat,r_idx,s_idx\n";
                for (size_t k = 0; k < sr.truth.n_pairs(); ++k)
                    csv += std::to_string(k) + "," + std::to_string(sr.truth.r_idx[k]) + "," +
                           std::to_string(sr.truth.s_idx[k]) + "\n";
                write_text(synth_truth_csv, csv);
            }

            if (synth_eval_detection) {
                FirSpec fir{pc.band_lo, pc.band_hi, pc.fir_order,
                            static_cast<double>(sr.record.fs)};
                std::vector<double> filtered =
                    filter_zero_phase(sr.record.samples, design_bandpass(fir));
                BeatSeries beats = detect_beats(filtered, sr.record.fs, pc.hamilton,
                                                pc.rr_bounds);
                ConfusionCounts cr = evaluate_peak_detection(beats.r_idx, sr.truth.r_idx,
                                                             match_tol_ms, sr.record.fs);
                ConfusionCounts cs = evaluate_peak_detection(beats.s_idx, sr.truth.s_idx,
                                                             match_tol_ms, sr.record.fs);
                std::cout << "R peaks:\n" << render_metrics_text(compute_metrics(cr));
                std::cout << "S peaks:\n" << render_metrics_text(compute_metrics(cs));
            }
            return 0;
        }

        if (*c_features) {
            if (!drop_boundary) {
                std::cerr << "error: boundary minutes are always dropped; padding is not "
                             "implemented\n";
                return 2;
            }
            pc.dataset_dir = features_dataset;
            pc.output_dir = features_out;
            pipeline::FeatureRunResult r = pipeline::run_features(pc);
            std::cout << pipeline::render_features_text(r);
            if (!features_json.empty())
                write_text(features_json, pipeline::render_features_json(r));
            if (features_csv)
                for (const auto& sf : r.splits) {
                    fs::path csv = sf.file;
                    csv.replace_extension(".csv");
                    write_feature_csv(csv, read_feature_file(sf.file));
                    std::cout << "csv " << csv.string() << "\n";
                }
            return r.failures.empty() ? 0 : 1;
        }

        if (*c_stats) {
            pipeline::StatsResult r = pipeline::run_stats(stats_features, stats_out);
            std::cout << "histograms -> " << r.histogram_csv.string() << "\n";
            std::cout << "summary    -> " << r.summary_json.string() << "\n";
            for (const auto& ch : r.channels) {
                char line[192];
                std::snprintf(line, sizeof line,
                              "  %-6s mean(SA) %9.4f  mean(non-SA) %9.4f  separation %7.3f\n",
                              ch.channel.c_str(), ch.mean_sa, ch.mean_non_sa, ch.separation);
                std::cout << line;
            }
            return 0;
        }

        if (*c_train) {
            pipeline::TrainRunResult r = pipeline::run_train(train_features, train_out, topts);
            std::cout << "checkpoint " << r.checkpoint.string() << " (best epoch " << r.best_epoch
                      << ", val F1 " << r.best_val_f1 << ", train/val " << r.n_train << "/"
                      << r.n_val << ")\n";
            if (r.diverged) {
                std::cout << "training diverged; checkpoint holds the last good epoch\n";
                return 1;
            }
            return 0;
        }

        if (*c_eval) {
            MetricsReport rep = pipeline::run_eval(eval_features, eval_model, eval_threshold);
            std::cout << render_metrics_text(rep);
            if (!eval_json.empty()) write_text(eval_json, render_metrics_json(rep));
            return 0;
        }

        if (*c_ablate) {
            pipeline::AblateRunResult r = pipeline::run_ablate(ab_train, ab_test, ab_out, topts);
            std::cout << render_ablation_text(r.table);
            std::cout << "report -> " << r.report_json.string() << "\n";
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
