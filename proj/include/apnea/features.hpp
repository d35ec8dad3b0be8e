#ifndef APNEA_FEATURES_HPP
#define APNEA_FEATURES_HPP

// 5-minute window assembly around labeled minutes, beat-feature series
// extraction, z-normalization and resampling to 900 points per channel.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "apnea/peaks.hpp"
#include "apnea/spline.hpp"
#include "apnea/wfdb.hpp"

namespace apnea {

enum class FeatureSet { ROnly, RAndS };

inline int channel_count(FeatureSet fs) { return fs == FeatureSet::ROnly ? 2 : 4; }

// Channel order is fixed: 0 = RR, 1 = R-amp, 2 = SS, 3 = S-amp.
// R_ONLY segments carry channels 0-1 and are bit-exact prefixes of
// R_AND_S segments built from the same beats.
inline constexpr std::array<const char*, 4> kChannelNames = {"rr", "r_amp", "ss", "s_amp"};

struct FeatureSegment {
    std::string record_id;
    int minute_index = 0;
    uint8_t label = 0;
    uint32_t beat_count = 0;  // paired beats inside the 5-minute window
    int n_channels = 4;
    std::vector<float> channels;          // n_channels * 900, z-normalized
    std::array<float, 4> mu{};            // pre-normalization mean per channel
    std::array<float, 4> sigma{};         // pre-normalization population std

    float at(int ch, int i) const { return channels[static_cast<size_t>(ch) * kFeaturePoints + i]; }
};

struct SampleRange {
    size_t begin = 0;
    size_t end = 0;  // exclusive
};

// Sample range [minute-2, minute+3) minutes. Minutes lacking the full
// two-minute context on either side are rejected (nullopt).
std::optional<SampleRange> assemble_window(const EcgRecord& record, int minute_index);

// The four (time, value) series of a window-restricted beat list.
// Interval series are stamped at the later peak of each pair; times are
// rebased to the window start, in seconds.
struct ChannelSeries {
    std::vector<double> t_rr, v_rr;
    std::vector<double> t_ramp, v_ramp;
    std::vector<double> t_ss, v_ss;
    std::vector<double> t_samp, v_samp;
};

// Beats of `beats` whose R and S both fall inside [range.begin, range.end).
BeatSeries beats_in_window(const BeatSeries& beats, const SampleRange& range);

ChannelSeries extract_channels(const BeatSeries& window_beats, size_t window_begin, int fs);

// Z-score with the vector's own mean and population std; a zero-variance
// vector maps to all zeros. Returns the moments used.
struct Moments {
    double mean = 0.0;
    double stddev = 0.0;
};
Moments normalize(std::vector<double>& values);

enum class RejectReason { None, InsufficientContext, TooFewBeats };

struct BuildParams {
    FeatureSet feature_set = FeatureSet::RAndS;
};

struct RecordBuildStats {
    std::string record_id;
    size_t n_labeled = 0;
    size_t n_built = 0;
    size_t n_rejected_context = 0;
    size_t n_rejected_sparse = 0;
};

struct BuildReport {
    std::vector<RecordBuildStats> per_record;
    size_t n_labeled = 0;
    size_t n_built = 0;
    size_t n_rejected_context = 0;
    size_t n_rejected_sparse = 0;

    // Reconciliation identity: built + rejections == labeled.
    bool reconciled() const {
        return n_built + n_rejected_context + n_rejected_sparse == n_labeled;
    }
};

// One segment per labeled minute that passes the context and knot
// checks, ordered by (record id, minute).
struct BuildResult {
    std::vector<FeatureSegment> segments;
    BuildReport report;
};

// Builds the segment for one labeled minute, or reports why not.
struct SegmentOutcome {
    RejectReason reject = RejectReason::None;
    std::optional<FeatureSegment> segment;
};
SegmentOutcome build_segment(const EcgRecord& record, const BeatSeries& beats, int minute_index,
                             FeatureSet feature_set);

BuildResult build_dataset(std::span<const EcgRecord> records,
                          std::span<const BeatSeries> beats_per_record,
                          const BuildParams& params);

}  // namespace apnea

#endif
