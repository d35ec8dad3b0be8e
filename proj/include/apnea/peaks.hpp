#ifndef APNEA_PEAKS_HPP
#define APNEA_PEAKS_HPP

// R-peak detection (Hamilton-style), RR-interval correction by a sliding
// local median rule, and S-peak location by the descent walk from each R.

#include <cstddef>
#include <span>
#include <vector>

#include "apnea/metrics.hpp"

namespace apnea {

// Detected beats. r_idx/s_idx are sample indices, strictly increasing;
// beat k pairs r_idx[k] with s_idx[k] (the S series may be shorter when
// a walk ran off the signal end). Amplitudes are read from the signal
// the peaks were detected on.
struct BeatSeries {
    std::vector<size_t> r_idx;
    std::vector<double> r_amp;
    std::vector<size_t> s_idx;
    std::vector<double> s_amp;
    int fs = 0;

    size_t n_pairs() const { return s_idx.size(); }
};

struct RrBounds {
    double rr_min = 0.3;  // s
    double rr_max = 2.0;  // s
    int window = 5;       // odd beat count for the local median
};

// Knobs of the R detector. The stage chain is fixed:
// differentiate -> rectify -> 80 ms moving-average envelope -> adaptive
// threshold at a fraction of the running peak estimate -> 200 ms
// refractory -> search-back at half threshold when no beat arrives for
// 1.5x the median RR.
struct HamiltonConfig {
    double envelope_ms = 80.0;
    double refractory_ms = 200.0;
    double threshold_fraction = 0.3125;  // position between noise and peak estimates
    double searchback_rr_factor = 1.5;
    double refine_ms = 80.0;  // half-width of the R argmax refinement window
};

// R-peak indices on a band-passed signal. Throws std::invalid_argument
// when the signal is shorter than 2 s (threshold initialization window).
std::vector<size_t> detect_r_peaks(std::span<const double> signal, int fs,
                                   const HamiltonConfig& cfg = {});

struct RrCorrectionResult {
    std::vector<size_t> r_idx;
    bool success = false;        // all intervals within bounds on return
    bool too_few_beats = false;  // input returned unchanged
    size_t n_merged = 0;
    size_t n_inserted = 0;
    size_t n_dropped = 0;  // beats removed as unfixable
};

// Sliding-local-median correction. An interval below rr_min merges with
// the neighbor whose merged length lands closest to the local median
// (ties toward the earlier neighbor); an interval above rr_max gains
// round(interval/median) - 1 equally spaced beats.
RrCorrectionResult correct_rr(std::span<const size_t> r_idx, int fs,
                              const RrBounds& bounds = {});

// Descent walk from each R peak: the S peak is the first index at which
// the signal stops falling. A walk that reaches the signal end yields no
// S peak and ends the scan, so the output may be shorter than r_idx.
std::vector<size_t> detect_s_peaks(std::span<const double> signal,
                                   std::span<const size_t> r_idx);

// Greedy in-order one-to-one matching of detected vs true indices within
// +-tolerance_ms. Matched = TP, unmatched truth = FN, unmatched
// detections = FP; TN is fixed at 0 (beats have no negative class).
ConfusionCounts evaluate_peak_detection(std::span<const size_t> detected,
                                        std::span<const size_t> truth,
                                        double tolerance_ms, int fs);

// Full beat series on a filtered signal: detect R, correct RR, walk S,
// read amplitudes. Beats whose S walk failed are dropped from the R list
// so r/s stay paired.
BeatSeries detect_beats(std::span<const double> filtered, int fs,
                        const HamiltonConfig& ham = {}, const RrBounds& bounds = {});

}  // namespace apnea

#endif
