#ifndef APNEA_WFDB_HPP
#define APNEA_WFDB_HPP

// PhysioNet WFDB container support: text headers (.hea), binary signal
// payloads (.dat, formats 212 and 16) and per-minute apnea annotation
// streams (.apn). Only what the Apnea-ECG database needs; anything else
// is rejected with an explicit error.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace apnea {

// One parsed signal line of a .hea file. Unspecified numeric fields keep
// WFDB defaults (gain 200, baseline = adc_zero = 0).
struct SignalInfo {
    std::string file_name;
    int fmt = 0;
    double gain = 200.0;
    int baseline = 0;
    int adc_zero = 0;
    std::string units = "mV";
    std::string description;
};

struct HeaderInfo {
    std::string record_name;
    int n_sig = 0;
    double fs = 0.0;
    uint64_t n_samples = 0;  // per signal; 0 when the header does not declare it
    std::vector<SignalInfo> signals;

    // Convenience accessors for the single-lead case.
    double gain() const { return signals.at(0).gain; }
    int fmt() const { return signals.at(0).fmt; }
};

// Sampled single-lead record in physical units with per-minute labels.
struct EcgRecord {
    std::string record_id;
    int fs = 0;                    // samples per second
    std::vector<double> samples;   // millivolts, gain applied exactly once
    std::vector<uint8_t> labels;   // per-minute: 1 = apnea, 0 = non-apnea

    size_t n_labeled_minutes() const { return labels.size(); }
};

// Learning-set (a/b/c) vs withheld-set (x) record ids.
struct DatasetSplit {
    std::vector<std::string> train_records;
    std::vector<std::string> test_records;
};

// True when the id follows the withheld-set naming convention (x01..x35).
bool is_test_record(const std::string& record_id);

DatasetSplit split_records(const std::vector<std::string>& record_ids);

// ---- header ----

// Parses a .hea text header. Supported storage formats: 212 and 16.
// Throws std::runtime_error on malformed lines or unsupported formats.
HeaderInfo parse_header(const std::string& text);

std::string format_header(const HeaderInfo& hdr);

// ---- signal payloads ----

// Decodes every signal in the payload (frames interleave signals in
// header order), sign-extends, subtracts baseline and divides by gain.
// When the header declares n_samples the decoded length must match.
std::vector<std::vector<double>> decode_all_signals(const std::vector<uint8_t>& bytes,
                                                    const HeaderInfo& hdr);

// First (sole) signal of the payload, in millivolts.
std::vector<double> decode_samples(const std::vector<uint8_t>& bytes,
                                   const HeaderInfo& hdr);

// Raw ADC counts of a single-signal payload, no gain/baseline applied.
std::vector<int32_t> decode_counts(const std::vector<uint8_t>& bytes, int fmt);
std::vector<uint8_t> encode_counts(const std::vector<int32_t>& counts, int fmt);

// ---- annotations ----

// MIT annotation stream limited to the Apnea-ECG vocabulary:
// code 1 ('N') = non-apnea minute, code 8 ('A') = apnea minute.
// NUM/SUB/CHN/AUX modifier words are skipped; SKIP extends the time
// delta; any other annotation code is an error, as is a non-monotonic
// timestamp sequence.
std::vector<uint8_t> parse_apnea_annotations(const std::vector<uint8_t>& bytes);

// Emits one marker per label at t = minute * 60 * fs.
std::vector<uint8_t> write_apnea_annotations(const std::vector<uint8_t>& labels, int fs);

// ---- record-level I/O ----

struct LoadOptions {
    bool require_annotations = false;
};

// Reads <dir>/<id>.hea, .dat and (when present) .apn. Labels whose
// minute starts beyond the signal end are dropped; the count of dropped
// labels is reported through `dropped_labels` when non-null.
EcgRecord load_record(const std::filesystem::path& dir, const std::string& record_id,
                      const LoadOptions& opts = {}, size_t* dropped_labels = nullptr);

// Writes the .hea/.dat/.apn trio for a record. Counts are quantized as
// round(mV * gain) and clamped to the format range. Used by the synth
// subcommand; doubles as the round-trip fixture generator.
void write_record(const std::filesystem::path& dir, const EcgRecord& rec,
                  int fmt = 16, double gain = 200.0);

// Record ids present in a directory (every *.hea stem), sorted.
std::vector<std::string> list_record_ids(const std::filesystem::path& dir);

}  // namespace apnea

#endif
