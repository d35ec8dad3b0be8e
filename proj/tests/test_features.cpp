#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <random>

#include "apnea/features.hpp"
#include "apnea/fir.hpp"
#include "apnea/synth.hpp"

using namespace apnea;

namespace {

EcgRecord minute_record(int n_minutes, int fs = 100) {
    EcgRecord rec;
    rec.record_id = "t";
    rec.fs = fs;
    rec.samples.assign(static_cast<size_t>(n_minutes) * 60 * fs, 0.0);
    rec.labels.assign(static_cast<size_t>(n_minutes), 0);
    return rec;
}

// Evenly spaced beats covering the whole record, one per second.
BeatSeries beats_for(const EcgRecord& rec) {
    BeatSeries bs;
    bs.fs = rec.fs;
    for (size_t t = 0; t + 10 < rec.samples.size(); t += static_cast<size_t>(rec.fs)) {
        bs.r_idx.push_back(t);
        bs.r_amp.push_back(1.0 + 0.01 * static_cast<double>(t % 7));
        bs.s_idx.push_back(t + 4);
        bs.s_amp.push_back(-0.4 - 0.01 * static_cast<double>(t % 5));
    }
    return bs;
}

}  // namespace

TEST_CASE("window arithmetic: minute 10 of a 60-minute record") {
    EcgRecord rec = minute_record(60);
    auto range = assemble_window(rec, 10);
    REQUIRE(range.has_value());
    CHECK(range->begin == 48000);
    CHECK(range->end == 78000);
}

TEST_CASE("boundary minutes are rejected for missing context") {
    EcgRecord rec = minute_record(10);
    CHECK_FALSE(assemble_window(rec, 0).has_value());
    CHECK_FALSE(assemble_window(rec, 1).has_value());
    CHECK(assemble_window(rec, 2).has_value());
    CHECK(assemble_window(rec, 7).has_value());
    CHECK_FALSE(assemble_window(rec, 8).has_value());
    CHECK_FALSE(assemble_window(rec, 9).has_value());
    CHECK_THROWS_AS(assemble_window(rec, 10), std::invalid_argument);
    CHECK_THROWS_AS(assemble_window(rec, -1), std::invalid_argument);
}

TEST_CASE("window needs trailing signal, not just a trailing label") {
    EcgRecord rec = minute_record(10);
    rec.samples.resize(rec.samples.size() - 1);  // one sample short of minute 10
    CHECK_FALSE(assemble_window(rec, 7).has_value());
    CHECK(assemble_window(rec, 6).has_value());
}

TEST_CASE("RR series is stamped at the later R of each pair") {
    BeatSeries bs;
    bs.fs = 100;
    bs.r_idx = {100, 200, 300, 400};
    bs.r_amp = {1, 1, 1, 1};
    bs.s_idx = {104, 204, 304, 404};
    bs.s_amp = {-1, -1, -1, -1};
    ChannelSeries cs = extract_channels(bs, 0, 100);
    REQUIRE(cs.t_rr.size() == 3);
    CHECK(cs.t_rr == std::vector<double>{2.0, 3.0, 4.0});
    CHECK(cs.v_rr == std::vector<double>{1.0, 1.0, 1.0});
    REQUIRE(cs.t_ramp.size() == 4);
    CHECK(cs.t_ramp[0] == 1.0);
}

TEST_CASE("times are rebased to the window start") {
    BeatSeries bs;
    bs.fs = 100;
    bs.r_idx = {6100, 6200};
    bs.r_amp = {1, 1};
    bs.s_idx = {6104, 6204};
    bs.s_amp = {-1, -1};
    ChannelSeries cs = extract_channels(bs, 6000, 100);
    CHECK(cs.t_ramp[0] == doctest::Approx(1.0));
    CHECK(cs.t_samp[1] == doctest::Approx(2.04));
}

TEST_CASE("normalize matches the hand z-score for [1,2,3]") {
    std::vector<double> v = {1.0, 2.0, 3.0};
    Moments m = normalize(v);
    CHECK(m.mean == doctest::Approx(2.0));
    CHECK(v[0] == doctest::Approx(-1.2247).epsilon(1e-4));
    CHECK(v[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(v[2] == doctest::Approx(1.2247).epsilon(1e-4));
}

TEST_CASE("constant vectors normalize to zeros") {
    std::vector<double> v(900, 3.7);
    Moments m = normalize(v);
    CHECK(m.stddev == 0.0);
    for (double x : v) CHECK(x == 0.0);
}

TEST_CASE("normalized vectors have unit moments") {
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> dist(-3.0, 9.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(900);
        for (auto& x : v) x = dist(rng);
        normalize(v);
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= static_cast<double>(v.size());
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
    }
}

TEST_CASE("build_segment rejects sparse windows") {
    EcgRecord rec = minute_record(10);
    BeatSeries bs;
    bs.fs = 100;
    // three beats inside minute 4's window
    for (size_t t : {20000u, 25000u, 29000u}) {
        bs.r_idx.push_back(t);
        bs.r_amp.push_back(1.0);
        bs.s_idx.push_back(t + 4);
        bs.s_amp.push_back(-0.4);
    }
    SegmentOutcome so = build_segment(rec, bs, 4, FeatureSet::RAndS);
    CHECK(so.reject == RejectReason::TooFewBeats);
}

TEST_CASE("beats only in the first window minute still build a segment") {
    EcgRecord rec = minute_record(10);
    BeatSeries bs;
    bs.fs = 100;
    // six beats, all inside minute 2 (the left context of minute 4)
    for (int k = 0; k < 6; ++k) {
        size_t t = 12000 + static_cast<size_t>(k) * 800;
        bs.r_idx.push_back(t);
        bs.r_amp.push_back(1.0 + 0.1 * k);
        bs.s_idx.push_back(t + 4);
        bs.s_amp.push_back(-0.4);
    }
    SegmentOutcome so = build_segment(rec, bs, 4, FeatureSet::RAndS);
    REQUIRE(so.reject == RejectReason::None);
    for (float v : so.segment->channels) CHECK(std::isfinite(v));
}

TEST_CASE("10-minute record yields exactly the six interior minutes") {
    EcgRecord rec = minute_record(10);
    BeatSeries bs = beats_for(rec);
    BuildResult br = build_dataset(std::vector<EcgRecord>{rec}, std::vector<BeatSeries>{bs}, {});
    CHECK(br.segments.size() == 6);
    for (size_t i = 0; i < br.segments.size(); ++i)
        CHECK(br.segments[i].minute_index == static_cast<int>(i) + 2);
    CHECK(br.report.n_labeled == 10);
    CHECK(br.report.n_rejected_context == 4);
    CHECK(br.report.n_rejected_sparse == 0);
    CHECK(br.report.reconciled());
}

TEST_CASE("empty record list gives an empty dataset") {
    BuildResult br = build_dataset({}, {}, {});
    CHECK(br.segments.empty());
    CHECK(br.report.n_labeled == 0);
    CHECK(br.report.reconciled());
}

TEST_CASE("every built channel is z-normalized") {
    SynthSpec sa;
    sa.r_amp_mv = 0.6;
    sa.heart_rate_bpm = 75.0;
    sa.noise_snr_db = 18.0;
    SynthSpec non;
    non.noise_snr_db = 18.0;
    auto sr = generate_labeled_pair(sa, non, 12);
    FirSpec fir{8.0, 12.0, 100, 100.0};
    auto filtered = filter_zero_phase(sr.record.samples, design_bandpass(fir));
    BeatSeries beats = detect_beats(filtered, sr.record.fs);
    BuildResult br =
        build_dataset(std::vector<EcgRecord>{sr.record}, std::vector<BeatSeries>{beats}, {});
    REQUIRE(br.segments.size() == 8);
    for (const auto& seg : br.segments) {
        REQUIRE(seg.channels.size() == 4 * 900);
        for (int ch = 0; ch < 4; ++ch) {
            if (seg.sigma[ch] == 0.0f) {
                // zero-variance channel maps to all zeros
                for (int i = 0; i < 900; ++i) CHECK(seg.at(ch, i) == 0.0f);
                continue;
            }
            double mean = 0.0;
            for (int i = 0; i < 900; ++i) mean += seg.at(ch, i);
            mean /= 900.0;
            double var = 0.0;
            for (int i = 0; i < 900; ++i) var += (seg.at(ch, i) - mean) * (seg.at(ch, i) - mean);
            var /= 900.0;
            CHECK(std::abs(mean) < 1e-6);
            CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("R-only segments are exact prefixes of R+S segments") {
    EcgRecord rec = minute_record(12);
    rec.labels[3] = 1;
    rec.labels[5] = 1;
    BeatSeries bs = beats_for(rec);
    BuildParams p4;
    BuildParams p2;
    p2.feature_set = FeatureSet::ROnly;
    BuildResult b4 =
        build_dataset(std::vector<EcgRecord>{rec}, std::vector<BeatSeries>{bs}, p4);
    BuildResult b2 =
        build_dataset(std::vector<EcgRecord>{rec}, std::vector<BeatSeries>{bs}, p2);
    REQUIRE(b4.segments.size() == b2.segments.size());
    for (size_t i = 0; i < b4.segments.size(); ++i) {
        const auto& s4 = b4.segments[i];
        const auto& s2 = b2.segments[i];
        CHECK(s2.n_channels == 2);
        CHECK(s2.label == s4.label);
        REQUIRE(s2.channels.size() == 2 * 900);
        for (size_t j = 0; j < s2.channels.size(); ++j) CHECK(s2.channels[j] == s4.channels[j]);
    }
}

TEST_CASE("time-shifted beats keep unit channel moments") {
    EcgRecord rec = minute_record(10);
    BeatSeries bs = beats_for(rec);
    BeatSeries shifted = bs;
    for (auto& t : shifted.r_idx) t += 37;
    for (auto& t : shifted.s_idx) t += 37;
    SegmentOutcome a = build_segment(rec, bs, 5, FeatureSet::RAndS);
    SegmentOutcome b = build_segment(rec, shifted, 5, FeatureSet::RAndS);
    REQUIRE(a.reject == RejectReason::None);
    REQUIRE(b.reject == RejectReason::None);
    for (const auto* seg : {&*a.segment, &*b.segment})
        for (int ch = 0; ch < 4; ++ch) {
            double mean = 0.0;
            for (int i = 0; i < 900; ++i) mean += seg->at(ch, i);
            CHECK(std::abs(mean / 900.0) < 1e-6);
        }
}
