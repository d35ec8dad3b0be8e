#include <doctest.h>

#include <filesystem>
#include <random>

#include "apnea/binio.hpp"
#include "apnea/wfdb.hpp"

using namespace apnea;

namespace {

// Independent bit-level format-212 decoder: assembles each 12-bit sample
// bit by bit from the packed layout, no byte-level shortcuts shared with
// the implementation.
std::vector<int32_t> brute_force_212(const std::vector<uint8_t>& bytes) {
    auto bit = [&](size_t byte_idx, int bit_idx) -> uint32_t {
        return (bytes[byte_idx] >> bit_idx) & 1u;
    };
    std::vector<int32_t> out;
    size_t frame = 0;
    while (frame + 3 <= bytes.size()) {
        uint32_t a = 0, b = 0;
        for (int i = 0; i < 8; ++i) a |= bit(frame, i) << i;          // low byte of sample 1
        for (int i = 0; i < 4; ++i) a |= bit(frame + 1, i) << (8 + i);  // high bits of sample 1
        for (int i = 0; i < 8; ++i) b |= bit(frame + 2, i) << i;        // low byte of sample 2
        for (int i = 4; i < 8; ++i) b |= bit(frame + 1, i) << (4 + i);  // high bits of sample 2
        for (uint32_t v : {a, b})
            out.push_back(v >= 2048 ? static_cast<int32_t>(v) - 4096 : static_cast<int32_t>(v));
        frame += 3;
    }
    if (bytes.size() - frame == 2) {
        uint32_t a = 0;
        for (int i = 0; i < 8; ++i) a |= bit(frame, i) << i;
        for (int i = 0; i < 4; ++i) a |= bit(frame + 1, i) << (8 + i);
        out.push_back(a >= 2048 ? static_cast<int32_t>(a) - 4096 : static_cast<int32_t>(a));
    }
    return out;
}

std::filesystem::path temp_dir(const char* tag) {
    auto p = std::filesystem::temp_directory_path() / (std::string("apnea_wfdb_") + tag);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("parse_header reads the declared fields") {
    std::string hea =
        "a01 1 100 2957000\n"
        "a01.dat 212 200 11 0 963 61467 0 ECG\n";
    HeaderInfo h = parse_header(hea);
    CHECK(h.record_name == "a01");
    CHECK(h.n_sig == 1);
    CHECK(h.fs == doctest::Approx(100.0));
    CHECK(h.n_samples == 2957000);
    CHECK(h.fmt() == 212);
    CHECK(h.gain() == doctest::Approx(200.0));
    CHECK(h.signals[0].description == "ECG");
}

TEST_CASE("parse_header baseline defaults to adc_zero") {
    HeaderInfo h = parse_header("r 1 100 10\nr.dat 16 200 12 1024 0 0 0 ECG\n");
    CHECK(h.signals[0].adc_zero == 1024);
    CHECK(h.signals[0].baseline == 1024);
    HeaderInfo h2 = parse_header("r 1 100 10\nr.dat 16 200(7)/mV 12 1024 0 0 0 ECG\n");
    CHECK(h2.signals[0].baseline == 7);
    CHECK(h2.signals[0].units == "mV");
}

TEST_CASE("parse_header rejects unsupported formats and malformed lines") {
    CHECK_THROWS_WITH_AS(parse_header("r 1 100 10\nr.dat 61 200\n"),
                         doctest::Contains("unsupported format"), std::runtime_error);
    CHECK_THROWS_AS(parse_header("r 1 100 10\n"), std::runtime_error);        // missing signal line
    CHECK_THROWS_AS(parse_header("r zero 100\nr.dat 16\n"), std::runtime_error);
    CHECK_THROWS_AS(parse_header(""), std::runtime_error);
    CHECK_THROWS_AS(parse_header("r 1 100 10\nr.dat 16x4 200\n"), std::runtime_error);
}

TEST_CASE("header round-trips through our writer") {
    HeaderInfo h;
    h.record_name = "t01";
    h.n_sig = 1;
    h.fs = 100;
    h.n_samples = 1234;
    SignalInfo sig;
    sig.file_name = "t01.dat";
    sig.fmt = 16;
    sig.gain = 200.0;
    sig.description = "ECG";
    h.signals.push_back(sig);

    HeaderInfo back = parse_header(format_header(h));
    CHECK(back.record_name == h.record_name);
    CHECK(back.n_sig == 1);
    CHECK(back.fs == doctest::Approx(100.0));
    CHECK(back.n_samples == 1234);
    CHECK(back.fmt() == 16);
    CHECK(back.gain() == doctest::Approx(200.0));
}

TEST_CASE("format 212 decodes like the bit-level oracle") {
    // E8 03 7D: low nibble of the middle byte extends the first sample,
    // high nibble the second.
    std::vector<uint8_t> bytes = {0xE8, 0x03, 0x7D};
    auto counts = decode_counts(bytes, 212);
    auto oracle = brute_force_212(bytes);
    REQUIRE(counts.size() == 2);
    CHECK(counts == oracle);
    CHECK(counts[0] == 1000);
    CHECK(counts[1] == 125);

    bytes = {0xE8, 0x73, 0xE5};
    counts = decode_counts(bytes, 212);
    CHECK(counts == brute_force_212(bytes));
    CHECK(counts[0] == 1000);
    CHECK(counts[1] == 2021);

    // negative samples sign-extend
    bytes = {0xFF, 0xFF, 0xFF};
    counts = decode_counts(bytes, 212);
    CHECK(counts == brute_force_212(bytes));
    CHECK(counts[0] == -1);
    CHECK(counts[1] == -1);
}

TEST_CASE("all-zero payload decodes to all-zero voltages") {
    HeaderInfo h = parse_header("z 1 100 4\nz.dat 212 200 12 0 0 0 0 ECG\n");
    std::vector<uint8_t> bytes(6, 0);
    auto mv = decode_samples(bytes, h);
    REQUIRE(mv.size() == 4);
    for (double v : mv) CHECK(v == 0.0);
}

TEST_CASE("encode/decode round-trips random counts (212 and 16)") {
    std::mt19937 rng(7);
    for (int fmt : {212, 16}) {
        int lo = fmt == 212 ? -2048 : -32768;
        int hi = fmt == 212 ? 2047 : 32767;
        std::uniform_int_distribution<int> dist(lo, hi);
        for (int trial = 0; trial < 50; ++trial) {
            size_t n = 1 + rng() % 101;  // odd lengths exercise the partial frame
            std::vector<int32_t> counts(n);
            for (auto& c : counts) c = dist(rng);
            auto back = decode_counts(encode_counts(counts, fmt), fmt);
            CHECK(back == counts);
            if (fmt == 212) CHECK(brute_force_212(encode_counts(counts, fmt)) == counts);
        }
    }
}

TEST_CASE("decode errors: truncation and length mismatch") {
    CHECK_THROWS_AS(decode_counts({0x01}, 212), std::runtime_error);
    CHECK_THROWS_AS(decode_counts({0x01}, 16), std::runtime_error);
    HeaderInfo h = parse_header("z 1 100 5\nz.dat 16 200 12 0 0 0 0 ECG\n");
    std::vector<uint8_t> four_samples(8, 0);
    CHECK_THROWS_WITH_AS(decode_samples(four_samples, h), doctest::Contains("mismatch"),
                         std::runtime_error);
}

TEST_CASE("gain and baseline are applied exactly once") {
    HeaderInfo h = parse_header("g 1 100 2\ng.dat 16 200 12 100 0 0 0 ECG\n");
    // counts 300, -100 with baseline 100, gain 200 -> 1.0 mV, -1.0 mV
    auto bytes = encode_counts({300, -100}, 16);
    auto mv = decode_samples(bytes, h);
    CHECK(mv[0] == doctest::Approx(1.0));
    CHECK(mv[1] == doctest::Approx(-1.0));
}

TEST_CASE("annotation stream maps A/N markers to labels") {
    // A,N,N,A at minute boundaries
    auto bytes = write_apnea_annotations({1, 0, 0, 1}, 100);
    auto labels = parse_apnea_annotations(bytes);
    CHECK(labels == std::vector<uint8_t>{1, 0, 0, 1});
}

TEST_CASE("empty annotation stream yields no labels") {
    auto bytes = write_apnea_annotations({}, 100);
    CHECK(parse_apnea_annotations(bytes).empty());
    CHECK(parse_apnea_annotations({}).empty());
}

TEST_CASE("annotation round-trip over random label sequences") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<uint8_t> labels(rng() % 600);
        for (auto& l : labels) l = rng() % 2;
        CHECK(parse_apnea_annotations(write_apnea_annotations(labels, 100)) == labels);
    }
}

TEST_CASE("annotation errors: unknown code and non-monotonic time") {
    ByteWriter w;
    w.u16(static_cast<uint16_t>((5 << 10) | 3));  // code 5 is not in the vocabulary
    CHECK_THROWS_WITH_AS(parse_apnea_annotations(w.data()), doctest::Contains("unknown"),
                         std::runtime_error);

    ByteWriter w2;  // two markers at the same instant
    w2.u16(static_cast<uint16_t>((1 << 10) | 10));
    w2.u16(static_cast<uint16_t>((8 << 10) | 0));
    CHECK_THROWS_WITH_AS(parse_apnea_annotations(w2.data()), doctest::Contains("monotonic"),
                         std::runtime_error);
}

TEST_CASE("record round-trips through write_record/load_record") {
    auto dir = temp_dir("roundtrip");
    EcgRecord rec;
    rec.record_id = "t01";
    rec.fs = 100;
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    rec.samples.resize(100 * 60 * 3);
    for (auto& s : rec.samples) s = dist(rng);
    rec.labels = {1, 0, 1};

    for (int fmt : {16, 212}) {
        write_record(dir, rec, fmt, fmt == 212 ? 200.0 : 1000.0);
        EcgRecord back = load_record(dir, "t01");
        REQUIRE(back.samples.size() == rec.samples.size());
        CHECK(back.fs == 100);
        CHECK(back.labels == rec.labels);
        double quantum = fmt == 212 ? 1.0 / 200.0 : 1.0 / 1000.0;
        for (size_t i = 0; i < rec.samples.size(); i += 997)
            CHECK(std::abs(back.samples[i] - rec.samples[i]) <= 0.5 * quantum + 1e-12);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("labels beyond the signal end are dropped") {
    auto dir = temp_dir("drop");
    EcgRecord rec;
    rec.record_id = "t02";
    rec.fs = 100;
    rec.samples.assign(100 * 60 * 2, 0.25);  // 2 minutes of signal
    rec.labels = {1, 0, 1, 1};               // 4 labels
    write_record(dir, rec);
    size_t dropped = 0;
    EcgRecord back = load_record(dir, "t02", {}, &dropped);
    CHECK(back.labels.size() == 2);
    CHECK(dropped == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("parsing is deterministic") {
    auto dir = temp_dir("det");
    EcgRecord rec;
    rec.record_id = "t03";
    rec.fs = 100;
    rec.samples.assign(100 * 130, 0.0);
    for (size_t i = 0; i < rec.samples.size(); ++i)
        rec.samples[i] = std::sin(static_cast<double>(i) * 0.05);
    rec.labels = {0, 1};
    write_record(dir, rec);
    EcgRecord a = load_record(dir, "t03");
    EcgRecord b = load_record(dir, "t03");
    CHECK(a.samples == b.samples);
    CHECK(a.labels == b.labels);
    std::filesystem::remove_all(dir);
}

TEST_CASE("dataset split follows the a/b/c vs x convention") {
    DatasetSplit split = split_records({"a01", "b03", "c10", "x01", "x35"});
    CHECK(split.train_records == std::vector<std::string>{"a01", "b03", "c10"});
    CHECK(split.test_records == std::vector<std::string>{"x01", "x35"});
}
