#include <doctest.h>

#include <filesystem>
#include <stdexcept>

#include "apnea/binio.hpp"
#include "apnea/feature_file.hpp"
#include "apnea/model.hpp"
#include "apnea/pipeline.hpp"
#include "apnea/synth.hpp"
#include "apnea/wfdb.hpp"

using namespace apnea;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* tag) {
    fs::path p = fs::temp_directory_path() / (std::string("apnea_pipe_") + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Small labeled dataset: two training records and one test record.
void write_synth_dataset(const fs::path& dir, int minutes, double snr) {
    SynthSpec sa;
    sa.r_amp_mv = 0.6;
    sa.s_amp_mv = 0.55;
    sa.heart_rate_bpm = 75.0;
    SynthSpec non;
    non.r_amp_mv = 1.0;
    non.s_amp_mv = 0.35;
    non.heart_rate_bpm = 60.0;
    if (snr > 0) {
        sa.noise_snr_db = snr;
        non.noise_snr_db = snr;
    }
    int i = 0;
    for (const char* id : {"a01", "a02", "x01"}) {
        sa.seed = 100 + i;
        non.seed = 200 + i;
        ++i;
        SynthResult sr = generate_labeled_pair(sa, non, minutes);
        sr.record.record_id = id;
        write_record(dir, sr.record);
    }
}

}  // namespace

TEST_CASE("ingest inventories a synthetic dataset") {
    fs::path dir = fresh_dir("ingest");
    write_synth_dataset(dir, 8, 0.0);
    pipeline::IngestResult r = pipeline::ingest(dir);
    CHECK(r.n_ok == 3);
    CHECK(r.n_failed == 0);
    REQUIRE(r.records.size() == 3);
    CHECK(r.records[0].record_id == "a01");
    CHECK(r.records[0].n_labeled_minutes == 8);
    CHECK(r.records[0].fs == 100);
    fs::remove_all(dir);
}

TEST_CASE("ingest flags corrupt records but keeps going") {
    fs::path dir = fresh_dir("corrupt");
    write_synth_dataset(dir, 6, 0.0);
    // truncate one .dat so its length disagrees with the header
    auto bytes = read_file(dir / "a02.dat");
    bytes.resize(bytes.size() / 2);
    write_file_atomic(dir / "a02.dat", bytes);

    pipeline::IngestResult r = pipeline::ingest(dir);
    CHECK(r.n_ok == 2);
    CHECK(r.n_failed == 1);
    bool flagged = false;
    for (const auto& inv : r.records)
        if (inv.record_id == "a02" && !inv.ok) flagged = true;
    CHECK(flagged);
    fs::remove_all(dir);
}

TEST_CASE("er-suffixed duplicate recordings are not inventoried") {
    fs::path dir = fresh_dir("er");
    write_synth_dataset(dir, 6, 0.0);
    // duplicate a01 under the respiration-variant naming convention
    for (const char* ext : {".hea", ".dat", ".apn"})
        fs::copy_file(dir / (std::string("a01") + ext), dir / (std::string("a01er") + ext));
    {
        auto hea = read_file(dir / "a01er.hea");
        std::string text(hea.begin(), hea.end());
        auto pos = text.find("a01");
        text.replace(pos, 3, "a01er");
        write_file_atomic(dir / "a01er.hea", std::vector<uint8_t>(text.begin(), text.end()));
    }
    pipeline::IngestResult r = pipeline::ingest(dir);
    CHECK(r.records.size() == 3);
    for (const auto& inv : r.records) CHECK(inv.record_id != "a01er");
    fs::remove_all(dir);
}

TEST_CASE("empty dataset directory is an empty inventory") {
    fs::path dir = fresh_dir("empty");
    pipeline::IngestResult r = pipeline::ingest(dir);
    CHECK(r.records.empty());
    CHECK(r.n_failed == 0);
    fs::remove_all(dir);
}

TEST_CASE("run_features splits records, reconciles and is deterministic") {
    fs::path dir = fresh_dir("features");
    write_synth_dataset(dir, 10, 0.0);
    pipeline::PipelineConfig cfg;
    cfg.dataset_dir = dir;
    cfg.output_dir = dir / "out";
    cfg.jobs = 2;

    pipeline::FeatureRunResult r = pipeline::run_features(cfg);
    REQUIRE(r.splits.size() == 2);
    const auto* train = r.split("train");
    const auto* test = r.split("test");
    REQUIRE(train);
    REQUIRE(test);
    CHECK(train->report.n_labeled == 20);  // two 10-minute records
    CHECK(train->n_segments == 12);        // six interior minutes each
    CHECK(train->report.reconciled());
    CHECK(test->n_segments == 6);
    CHECK(train->n_sa + train->n_non_sa == train->n_segments);

    auto segs = read_feature_file(train->file);
    CHECK(segs.size() == 12);
    CHECK(segs.front().record_id == "a01");
    CHECK(segs.front().n_channels == 4);

    // rerun: byte-identical artifacts
    auto before = read_file(train->file);
    pipeline::FeatureRunResult r2 = pipeline::run_features(cfg);
    CHECK(read_file(r2.split("train")->file) == before);
    CHECK(r2.split("train")->file == train->file);

    fs::remove_all(dir);
}

TEST_CASE("run_features aggregates per-record failures and continues") {
    fs::path dir = fresh_dir("features_fail");
    write_synth_dataset(dir, 8, 0.0);
    auto bytes = read_file(dir / "a01.dat");
    bytes.resize(7);  // not a valid frame multiple
    write_file_atomic(dir / "a01.dat", bytes);

    pipeline::PipelineConfig cfg;
    cfg.dataset_dir = dir;
    cfg.output_dir = dir / "out";
    pipeline::FeatureRunResult r = pipeline::run_features(cfg);
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].record_id == "a01");
    const auto* train = r.split("train");
    REQUIRE(train);
    CHECK(train->report.per_record.size() == 1);  // only a02 contributed
    fs::remove_all(dir);
}

TEST_CASE("stats histograms account for every sample and separate the classes") {
    fs::path dir = fresh_dir("stats");
    write_synth_dataset(dir, 10, 0.0);
    pipeline::PipelineConfig cfg;
    cfg.dataset_dir = dir;
    cfg.output_dir = dir / "out";
    pipeline::FeatureRunResult fr = pipeline::run_features(cfg);
    pipeline::StatsResult sr = pipeline::run_stats(fr.split("train")->file, dir / "stats");

    REQUIRE(sr.channels.size() == 4);
    // synthetic SA minutes have lower R amplitude
    CHECK(sr.channels[1].channel == std::string("r_amp"));
    CHECK(sr.channels[1].mean_sa < sr.channels[1].mean_non_sa);

    // re-parse the CSV: per channel, counts total segments * 900
    auto csv_bytes = read_file(sr.histogram_csv);
    std::string csv(csv_bytes.begin(), csv_bytes.end());
    size_t total = 0;
    size_t pos = csv.find('\n') + 1;
    while (pos < csv.size()) {
        size_t eol = csv.find('\n', pos);
        if (eol == std::string::npos) break;
        std::string line = csv.substr(pos, eol - pos);
        pos = eol + 1;
        size_t last_comma = line.rfind(',');
        total += std::stoull(line.substr(last_comma + 1));
    }
    CHECK(total == sr.n_segments * 900 * 4);
    fs::remove_all(dir);
}

TEST_CASE("take_r_only keeps the channel prefix") {
    FeatureSegment s;
    s.record_id = "a01";
    s.minute_index = 5;
    s.label = 1;
    s.n_channels = 4;
    s.channels.resize(4 * kFeaturePoints);
    for (size_t i = 0; i < s.channels.size(); ++i) s.channels[i] = static_cast<float>(i);
    FeatureSegment r = pipeline::take_r_only(s);
    CHECK(r.n_channels == 2);
    REQUIRE(r.channels.size() == 2 * kFeaturePoints);
    for (size_t i = 0; i < r.channels.size(); ++i) CHECK(r.channels[i] == s.channels[i]);
}

TEST_CASE("validation split is record-level when possible") {
    std::vector<FeatureSegment> segs;
    for (int r = 0; r < 5; ++r)
        for (int m = 0; m < 4; ++m) {
            FeatureSegment s;
            s.record_id = "r" + std::to_string(r);
            s.minute_index = m;
            s.n_channels = 2;
            s.channels.resize(2 * kFeaturePoints);
            segs.push_back(s);
        }
    pipeline::ValSplit split = pipeline::split_for_validation(segs, 0.2);
    CHECK(split.record_level);
    CHECK(split.val.size() == 4);  // one record of five
    for (const auto& s : split.val) CHECK(s.record_id == split.val.front().record_id);
    CHECK(split.train.size() + split.val.size() == segs.size());

    // single record falls back to segment-level
    std::vector<FeatureSegment> one(segs.begin(), segs.begin() + 4);
    for (auto& s : one) s.record_id = "solo";
    pipeline::ValSplit fallback = pipeline::split_for_validation(one, 0.2);
    CHECK_FALSE(fallback.record_level);
    CHECK(fallback.val.size() + fallback.train.size() == 4);
    CHECK(!fallback.val.empty());
}

TEST_CASE("two seeds give two distinct valid checkpoints") {
    fs::path dir = fresh_dir("seeds");
    write_synth_dataset(dir, 10, 0.0);
    pipeline::PipelineConfig cfg;
    cfg.dataset_dir = dir;
    cfg.output_dir = dir / "out";
    pipeline::FeatureRunResult fr = pipeline::run_features(cfg);

    pipeline::TrainOptions opts;
    opts.model.n_blocks = 1;
    opts.model.width = 8;
    opts.model.cardinality = 2;
    opts.model.se_reduction = 4;
    opts.train.epochs = 3;
    opts.train.batch_size = 8;
    opts.train.seed = 1;
    pipeline::TrainRunResult a =
        pipeline::run_train(fr.split("train")->file, dir / "m1.apnc", opts);
    opts.train.seed = 2;
    pipeline::TrainRunResult b =
        pipeline::run_train(fr.split("train")->file, dir / "m2.apnc", opts);
    CHECK(read_file(a.checkpoint) != read_file(b.checkpoint));

    MetricsReport ra = pipeline::run_eval(fr.split("test")->file, a.checkpoint);
    MetricsReport rb = pipeline::run_eval(fr.split("test")->file, b.checkpoint);
    CHECK(ra.counts.total() == rb.counts.total());
    fs::remove_all(dir);
}

TEST_CASE("eval reports a stage-labeled channel mismatch") {
    fs::path dir = fresh_dir("mismatch");
    write_synth_dataset(dir, 10, 0.0);
    pipeline::PipelineConfig cfg;
    cfg.dataset_dir = dir;
    cfg.output_dir = dir / "out";
    pipeline::FeatureRunResult fr = pipeline::run_features(cfg);  // 4-channel features

    nn::ModelConfig mc;
    mc.in_channels = 2;
    mc.n_blocks = 1;
    mc.width = 8;
    mc.cardinality = 2;
    mc.se_reduction = 4;
    nn::save_checkpoint(dir / "m2ch.apnc", nn::init_model(mc, 1), {});
    CHECK_THROWS_WITH_AS(pipeline::run_eval(fr.split("test")->file, dir / "m2ch.apnc"),
                         doctest::Contains("eval stage"), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("feature key changes with the band and feature set") {
    pipeline::PipelineConfig a;
    pipeline::PipelineConfig b;
    b.band_hi = 20.0;
    pipeline::PipelineConfig c;
    c.feature_set = FeatureSet::ROnly;
    CHECK(a.feature_key() != b.feature_key());
    CHECK(a.feature_key() != c.feature_key());
    CHECK(a.feature_key() == pipeline::PipelineConfig{}.feature_key());
}
