#include "apnea/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "apnea/binio.hpp"
#include "apnea/feature_file.hpp"
#include "apnea/wfdb.hpp"

namespace apnea::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed) {
    const auto* p = static_cast<const uint8_t*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

std::string PipelineConfig::feature_key() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "band=%.6g,%.6g;order=%d;rr=%.6g,%.6g,%d;ham=%.6g,%.6g,%.6g,%.6g,%.6g;fset=%d",
                  band_lo, band_hi, fir_order, rr_bounds.rr_min, rr_bounds.rr_max,
                  rr_bounds.window, hamilton.envelope_ms, hamilton.refractory_ms,
                  hamilton.threshold_fraction, hamilton.searchback_rr_factor,
                  hamilton.refine_ms, static_cast<int>(feature_set));
    return buf;
}

// ---- ingest ----

namespace {

// The Apnea-ECG release ships each learning-set recording a second time
// with added respiration channels under an "er" suffix; those stems
// duplicate the 70-record set and are not inventoried.
bool is_er_duplicate(const std::string& id) {
    return id.size() > 2 && id.compare(id.size() - 2, 2, "er") == 0;
}

std::vector<std::string> dataset_record_ids(const fs::path& dir) {
    std::vector<std::string> ids;
    for (std::string& id : list_record_ids(dir))
        if (!is_er_duplicate(id)) ids.push_back(std::move(id));
    return ids;
}

}  // namespace

IngestResult ingest(const fs::path& dataset_dir) {
    IngestResult out;
    for (const std::string& id : dataset_record_ids(dataset_dir)) {
        RecordInventory inv;
        inv.record_id = id;
        try {
            size_t dropped = 0;
            EcgRecord rec = load_record(dataset_dir, id, {}, &dropped);
            inv.ok = true;
            inv.fs = rec.fs;
            inv.n_samples = rec.samples.size();
            inv.duration_s = static_cast<double>(rec.samples.size()) / rec.fs;
            inv.n_labeled_minutes = rec.labels.size();
            inv.dropped_labels = dropped;
            ++out.n_ok;
        } catch (const std::exception& e) {
            inv.error = e.what();
            ++out.n_failed;
        }
        out.records.push_back(std::move(inv));
    }
    return out;
}

std::string render_ingest_text(const IngestResult& r) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-8s %6s %12s %10s %8s %s\n", "record", "fs", "samples",
                  "hours", "minutes", "status");
    os << line;
    for (const auto& inv : r.records) {
        if (inv.ok) {
            std::snprintf(line, sizeof line, "%-8s %6d %12zu %10.2f %8zu ok%s\n",
                          inv.record_id.c_str(), inv.fs, inv.n_samples, inv.duration_s / 3600.0,
                          inv.n_labeled_minutes,
                          inv.dropped_labels ? " (labels beyond signal dropped)" : "");
        } else {
            std::snprintf(line, sizeof line, "%-8s %6s %12s %10s %8s FAILED: %s\n",
                          inv.record_id.c_str(), "-", "-", "-", "-", inv.error.c_str());
        }
        os << line;
    }
    os << r.n_ok << " records ok, " << r.n_failed << " failed\n";
    return os.str();
}

std::string render_ingest_json(const IngestResult& r) {
    json j;
    j["n_ok"] = r.n_ok;
    j["n_failed"] = r.n_failed;
    j["records"] = json::array();
    for (const auto& inv : r.records) {
        json e;
        e["record_id"] = inv.record_id;
        e["ok"] = inv.ok;
        if (inv.ok) {
            e["fs"] = inv.fs;
            e["n_samples"] = inv.n_samples;
            e["duration_s"] = inv.duration_s;
            e["n_labeled_minutes"] = inv.n_labeled_minutes;
            e["dropped_labels"] = inv.dropped_labels;
        } else {
            e["error"] = inv.error;
        }
        j["records"].push_back(e);
    }
    return j.dump(2);
}

// ---- features ----

namespace {

struct RecordOutcome {
    std::string record_id;
    bool ok = false;
    std::string error;
    std::vector<FeatureSegment> segments;
    RecordBuildStats stats;
    uint64_t input_hash = 0;
};

RecordOutcome process_record(const fs::path& dir, const std::string& id,
                             const PipelineConfig& cfg) {
    RecordOutcome out;
    out.record_id = id;
    try {
        uint64_t h = fnv1a64(id.data(), id.size());
        for (const char* ext : {".hea", ".dat", ".apn"}) {
            fs::path p = dir / (id + ext);
            if (fs::exists(p)) {
                auto bytes = read_file(p);
                h = fnv1a64(bytes.data(), bytes.size(), h);
            }
        }
        out.input_hash = h;

        EcgRecord rec = load_record(dir, id, {.require_annotations = true});
        FirSpec fir{cfg.band_lo, cfg.band_hi, cfg.fir_order, static_cast<double>(rec.fs)};
        std::vector<double> taps = design_bandpass(fir);
        std::vector<double> filtered = filter_zero_phase(rec.samples, taps);
        BeatSeries beats = detect_beats(filtered, rec.fs, cfg.hamilton, cfg.rr_bounds);

        out.stats.record_id = id;
        out.stats.n_labeled = rec.labels.size();
        for (size_t minute = 0; minute < rec.labels.size(); ++minute) {
            SegmentOutcome so =
                build_segment(rec, beats, static_cast<int>(minute), cfg.feature_set);
            switch (so.reject) {
                case RejectReason::None:
                    out.segments.push_back(std::move(*so.segment));
                    ++out.stats.n_built;
                    break;
                case RejectReason::InsufficientContext:
                    ++out.stats.n_rejected_context;
                    break;
                case RejectReason::TooFewBeats:
                    ++out.stats.n_rejected_sparse;
                    break;
            }
        }
        out.ok = true;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

}  // namespace

FeatureRunResult run_features(const PipelineConfig& cfg) {
    std::vector<std::string> ids = dataset_record_ids(cfg.dataset_dir);
    if (ids.empty()) throw std::runtime_error("no records in " + cfg.dataset_dir.string());
    fs::create_directories(cfg.output_dir);

    // Record-level worker pool; merge order is fixed by the sorted id list.
    std::vector<RecordOutcome> outcomes(ids.size());
    std::atomic<size_t> next{0};
    int jobs = std::max(1, cfg.jobs);
    auto worker = [&] {
        for (size_t i = next.fetch_add(1); i < ids.size(); i = next.fetch_add(1))
            outcomes[i] = process_record(cfg.dataset_dir, ids[i], cfg);
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    FeatureRunResult result;
    uint64_t key = fnv1a64(cfg.feature_key().data(), cfg.feature_key().size());

    std::vector<const RecordOutcome*> train_set, test_set;
    for (const auto& oc : outcomes) {
        if (!oc.ok) {
            RecordInventory inv;
            inv.record_id = oc.record_id;
            inv.error = oc.error;
            result.failures.push_back(std::move(inv));
            continue;
        }
        key ^= oc.input_hash;
        key *= 0x100000001B3ull;
        (is_test_record(oc.record_id) ? test_set : train_set).push_back(&oc);
    }
    char keyhex[32];
    std::snprintf(keyhex, sizeof keyhex, "%016" PRIx64, key);
    result.input_key = keyhex;

    auto emit_split = [&](const std::vector<const RecordOutcome*>& set, const std::string& name) {
        if (set.empty()) return;
        SplitFeatures sf;
        sf.split = name;
        std::vector<FeatureSegment> segments;
        for (const RecordOutcome* oc : set) {
            sf.report.per_record.push_back(oc->stats);
            sf.report.n_labeled += oc->stats.n_labeled;
            sf.report.n_built += oc->stats.n_built;
            sf.report.n_rejected_context += oc->stats.n_rejected_context;
            sf.report.n_rejected_sparse += oc->stats.n_rejected_sparse;
            segments.insert(segments.end(), oc->segments.begin(), oc->segments.end());
        }
        sf.n_segments = segments.size();
        for (const auto& s : segments) (s.label ? sf.n_sa : sf.n_non_sa)++;
        sf.file = cfg.output_dir / ("features_" + name + "_" + result.input_key + ".apnf");
        write_feature_file(sf.file, segments);
        result.splits.push_back(std::move(sf));
    };
    emit_split(train_set, "train");
    emit_split(test_set, "test");

    // Manifest so later stages can find the newest artifacts.
    json manifest;
    fs::path mpath = cfg.output_dir / "manifest.json";
    if (fs::exists(mpath)) {
        auto bytes = read_file(mpath);
        manifest = json::parse(bytes.begin(), bytes.end(), nullptr, false);
        if (manifest.is_discarded()) manifest = json::object();
    }
    for (const auto& sf : result.splits)
        manifest["features"][sf.split] = {{"path", sf.file.filename().string()},
                                          {"input_key", result.input_key}};
    std::string mtext = manifest.dump(2);
    write_file_atomic(mpath, std::vector<uint8_t>(mtext.begin(), mtext.end()));

    return result;
}

std::string render_features_text(const FeatureRunResult& r) {
    std::ostringstream os;
    for (const auto& sf : r.splits) {
        os << "split " << sf.split << " -> " << sf.file.string() << "\n";
        char line[256];
        std::snprintf(line, sizeof line,
                      "  labeled minutes %zu | built %zu | rejected: context %zu, sparse %zu | "
                      "reconciled %s\n",
                      sf.report.n_labeled, sf.report.n_built, sf.report.n_rejected_context,
                      sf.report.n_rejected_sparse, sf.report.reconciled() ? "yes" : "NO");
        os << line;
        double sa_pct = sf.n_segments
                            ? 100.0 * static_cast<double>(sf.n_sa) / static_cast<double>(sf.n_segments)
                            : 0.0;
        std::snprintf(line, sizeof line, "  segments %zu | SA %zu (%.2f%%) | non-SA %zu\n",
                      sf.n_segments, sf.n_sa, sa_pct, sf.n_non_sa);
        os << line;
    }
    for (const auto& f : r.failures)
        os << "FAILED " << f.record_id << ": " << f.error << "\n";
    return os.str();
}

std::string render_features_json(const FeatureRunResult& r) {
    json j;
    j["input_key"] = r.input_key;
    j["splits"] = json::array();
    for (const auto& sf : r.splits) {
        json s;
        s["split"] = sf.split;
        s["file"] = sf.file.string();
        s["n_segments"] = sf.n_segments;
        s["n_sa"] = sf.n_sa;
        s["n_non_sa"] = sf.n_non_sa;
        s["n_labeled"] = sf.report.n_labeled;
        s["n_rejected_context"] = sf.report.n_rejected_context;
        s["n_rejected_sparse"] = sf.report.n_rejected_sparse;
        s["reconciled"] = sf.report.reconciled();
        s["per_record"] = json::array();
        for (const auto& pr : sf.report.per_record)
            s["per_record"].push_back({{"record_id", pr.record_id},
                                       {"n_labeled", pr.n_labeled},
                                       {"n_built", pr.n_built},
                                       {"n_rejected_context", pr.n_rejected_context},
                                       {"n_rejected_sparse", pr.n_rejected_sparse}});
        j["splits"].push_back(s);
    }
    j["failures"] = json::array();
    for (const auto& f : r.failures)
        j["failures"].push_back({{"record_id", f.record_id}, {"error", f.error}});
    return j.dump(2);
}

// ---- stats ----

StatsResult run_stats(const fs::path& features_path, const fs::path& out_dir) {
    std::vector<FeatureSegment> segments = read_feature_file(features_path);
    if (segments.empty()) throw std::runtime_error("feature file has no segments");
    fs::create_directories(out_dir);

    int n_channels = segments.front().n_channels;
    constexpr int kBins = 50;
    StatsResult result;
    result.n_segments = segments.size();

    std::ostringstream csv;
    csv << "channel,class,bin_index,bin_lo,bin_hi,count\n";

    for (int ch = 0; ch < n_channels; ++ch) {
        // pooled range over both classes, raw units
        double lo = 0.0, hi = 0.0;
        bool first = true;
        for (const auto& s : segments)
            for (int i = 0; i < kFeaturePoints; ++i) {
                double v = static_cast<double>(s.at(ch, i)) * s.sigma[ch] + s.mu[ch];
                if (first) {
                    lo = hi = v;
                    first = false;
                } else {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            }

        std::array<std::vector<uint64_t>, 2> bins = {std::vector<uint64_t>(kBins, 0),
                                                     std::vector<uint64_t>(kBins, 0)};
        std::array<double, 2> mean_sum = {0.0, 0.0};
        std::array<std::vector<double>, 2> seg_means;
        for (const auto& s : segments) {
            double seg_sum = 0.0;
            for (int i = 0; i < kFeaturePoints; ++i) {
                double v = static_cast<double>(s.at(ch, i)) * s.sigma[ch] + s.mu[ch];
                seg_sum += v;
                int b = 0;
                if (hi > lo)
                    b = std::clamp(static_cast<int>((v - lo) / (hi - lo) * kBins), 0, kBins - 1);
                ++bins[s.label ? 1 : 0][static_cast<size_t>(b)];
            }
            int cls = s.label ? 1 : 0;
            mean_sum[cls] += seg_sum / kFeaturePoints;
            seg_means[cls].push_back(seg_sum / kFeaturePoints);
        }

        for (int cls = 0; cls < 2; ++cls)
            for (int b = 0; b < kBins; ++b) {
                double w = hi > lo ? (hi - lo) / kBins : 0.0;
                char line[160];
                std::snprintf(line, sizeof line, "%s,%s,%d,%.9g,%.9g,%" PRIu64 "\n",
                              kChannelNames[ch], cls ? "sa" : "non_sa", b, lo + b * w,
                              lo + (b + 1) * w, bins[cls][static_cast<size_t>(b)]);
                csv << line;
            }

        ChannelClassStats cs;
        cs.channel = kChannelNames[ch];
        auto n_sa = static_cast<double>(seg_means[1].size());
        auto n_non = static_cast<double>(seg_means[0].size());
        cs.mean_sa = n_sa ? mean_sum[1] / n_sa : 0.0;
        cs.mean_non_sa = n_non ? mean_sum[0] / n_non : 0.0;
        double var = 0.0;
        for (int cls = 0; cls < 2; ++cls) {
            double m = cls ? cs.mean_sa : cs.mean_non_sa;
            for (double v : seg_means[cls]) var += (v - m) * (v - m);
        }
        double denom = n_sa + n_non - 2.0;
        cs.pooled_std = denom > 0 ? std::sqrt(var / denom) : 0.0;
        cs.separation = cs.pooled_std > 0 ? (cs.mean_non_sa - cs.mean_sa) / cs.pooled_std : 0.0;
        result.channels.push_back(std::move(cs));
    }

    result.histogram_csv = out_dir / "histograms.csv";
    std::string csv_text = csv.str();
    write_file_atomic(result.histogram_csv,
                      std::vector<uint8_t>(csv_text.begin(), csv_text.end()));

    json j;
    j["n_segments"] = result.n_segments;
    j["channels"] = json::array();
    for (const auto& cs : result.channels)
        j["channels"].push_back({{"channel", cs.channel},
                                 {"mean_sa", cs.mean_sa},
                                 {"mean_non_sa", cs.mean_non_sa},
                                 {"pooled_std", cs.pooled_std},
                                 {"separation", cs.separation}});
    result.summary_json = out_dir / "stats_summary.json";
    std::string jtext = j.dump(2);
    write_file_atomic(result.summary_json, std::vector<uint8_t>(jtext.begin(), jtext.end()));
    return result;
}

// ---- train / eval / ablate ----

FeatureSegment take_r_only(const FeatureSegment& seg) {
    if (seg.n_channels < 2) throw std::invalid_argument("segment has no R channels");
    FeatureSegment out = seg;
    out.n_channels = 2;
    out.channels.assign(seg.channels.begin(), seg.channels.begin() + 2 * kFeaturePoints);
    out.mu[2] = out.mu[3] = 0.0f;
    out.sigma[2] = out.sigma[3] = 0.0f;
    return out;
}

ValSplit split_for_validation(std::vector<FeatureSegment> segments, double val_fraction) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw std::invalid_argument("val_fraction must lie in (0, 1)");
    ValSplit out;
    std::set<std::string> id_set;
    for (const auto& s : segments) id_set.insert(s.record_id);

    if (id_set.size() >= 2) {
        // every k-th sorted record goes to validation
        std::vector<std::string> ids(id_set.begin(), id_set.end());
        auto stride = static_cast<size_t>(std::lround(1.0 / val_fraction));
        stride = std::clamp<size_t>(stride, 2, ids.size());
        std::set<std::string> val_ids;
        for (size_t i = stride - 1; i < ids.size(); i += stride) val_ids.insert(ids[i]);
        for (auto& s : segments)
            (val_ids.count(s.record_id) ? out.val : out.train).push_back(std::move(s));
    } else {
        // single record: fall back to a segment-level split
        out.record_level = false;
        if (segments.size() < 2)
            throw std::runtime_error("validation split needs at least two segments");
        auto stride = static_cast<size_t>(std::lround(1.0 / val_fraction));
        stride = std::clamp<size_t>(stride, 2, segments.size());
        for (size_t i = 0; i < segments.size(); ++i)
            ((i % stride) == stride - 1 ? out.val : out.train).push_back(std::move(segments[i]));
    }
    if (out.val.empty() || out.train.empty())
        throw std::runtime_error("validation split left an empty set");
    return out;
}

TrainRunResult run_train(const fs::path& features_path, const fs::path& checkpoint_path,
                         TrainOptions opts) {
    std::vector<FeatureSegment> segments = read_feature_file(features_path);
    if (segments.empty()) throw std::runtime_error("feature file has no segments");
    opts.model.in_channels = segments.front().n_channels;

    ValSplit split = split_for_validation(std::move(segments), opts.val_fraction);
    nn::TrainResult tr = nn::train(opts.model, opts.train, split.train, split.val);

    nn::CheckpointMeta meta;
    meta.seed = opts.train.seed;
    meta.best_epoch = tr.best_epoch;
    meta.best_f1 = tr.best_f1;
    if (checkpoint_path.has_parent_path()) fs::create_directories(checkpoint_path.parent_path());
    nn::save_checkpoint(checkpoint_path, tr.best, meta);

    TrainRunResult out;
    out.checkpoint = checkpoint_path;
    out.best_epoch = tr.best_epoch;
    out.best_val_f1 = tr.best_f1;
    out.diverged = tr.diverged;
    out.n_train = split.train.size();
    out.n_val = split.val.size();
    return out;
}

MetricsReport run_eval(const fs::path& features_path, const fs::path& checkpoint_path,
                       double threshold) {
    std::vector<FeatureSegment> segments = read_feature_file(features_path);
    if (segments.empty()) throw std::runtime_error("feature file has no segments");
    nn::Checkpoint ck = nn::load_checkpoint(checkpoint_path);
    if (ck.model.cfg.in_channels != segments.front().n_channels)
        throw std::runtime_error("eval stage: checkpoint expects " +
                                 std::to_string(ck.model.cfg.in_channels) +
                                 " channels, features have " +
                                 std::to_string(segments.front().n_channels));
    return nn::evaluate(ck.model, segments, threshold);
}

AblateRunResult run_ablate(const fs::path& train_features, const fs::path& test_features,
                           const fs::path& out_dir, const TrainOptions& opts) {
    std::vector<FeatureSegment> train4 = read_feature_file(train_features);
    std::vector<FeatureSegment> test4 = read_feature_file(test_features);
    if (train4.empty() || test4.empty()) throw std::runtime_error("empty feature file");
    if (train4.front().n_channels != 4)
        throw std::runtime_error("ablation needs 4-channel features");
    fs::create_directories(out_dir);

    std::vector<FeatureSegment> train2, test2;
    train2.reserve(train4.size());
    test2.reserve(test4.size());
    for (const auto& s : train4) train2.push_back(take_r_only(s));
    for (const auto& s : test4) test2.push_back(take_r_only(s));

    auto run_one = [&](std::vector<FeatureSegment> train_segs,
                       const std::vector<FeatureSegment>& test_segs, const char* tag) {
        TrainOptions o = opts;
        o.model.in_channels = train_segs.front().n_channels;
        ValSplit split = split_for_validation(std::move(train_segs), o.val_fraction);
        nn::TrainResult tr = nn::train(o.model, o.train, split.train, split.val);
        nn::CheckpointMeta meta{o.train.seed, tr.best_epoch, tr.best_f1};
        nn::save_checkpoint(out_dir / (std::string("model_") + tag + ".apnc"), tr.best, meta);
        return nn::evaluate(tr.best, test_segs);
    };

    MetricsReport rep_r = run_one(std::move(train2), test2, "r");
    MetricsReport rep_rs = run_one(std::move(train4), test4, "rs");

    AblateRunResult out;
    out.table = compare_feature_sets(rep_r, rep_rs);
    out.report_json = out_dir / "ablation.json";
    std::string jtext = render_ablation_json(out.table);
    write_file_atomic(out.report_json, std::vector<uint8_t>(jtext.begin(), jtext.end()));
    return out;
}

}  // namespace apnea::pipeline
