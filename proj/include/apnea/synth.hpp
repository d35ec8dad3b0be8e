#ifndef APNEA_SYNTH_HPP
#define APNEA_SYNTH_HPP

// Synthetic single-lead ECG with exact beat ground truth. Gaussian R/S
// bumps placed at known beat times; serves as the independent oracle
// for peak detection, feature extraction and classifier tests.

#include <cstdint>
#include <optional>
#include <vector>

#include "apnea/peaks.hpp"
#include "apnea/wfdb.hpp"

namespace apnea {

struct SynthSpec {
    int fs = 100;
    double duration_s = 60.0;
    double heart_rate_bpm = 60.0;                  // used when bpm_profile is empty
    std::vector<double> bpm_profile;               // optional per-minute rates
    double r_amp_mv = 1.0;
    double s_amp_mv = 0.4;
    double r_sigma_ms = 18.0;
    double s_sigma_ms = 12.0;
    double s_lag_ms = 40.0;                        // S trough delay after R
    std::optional<double> noise_snr_db;            // absent: clean template train
    uint64_t seed = 1;
};

struct SynthResult {
    EcgRecord record;
    BeatSeries truth;  // ground-truth R/S indices and clean amplitudes
};

// Deterministic per seed. Ground truth is asserted during generation:
// the R index is the argmax and the S index the argmin of the clean
// signal within each beat window.
SynthResult generate(const SynthSpec& spec);

// Alternating minutes drawn from two specs (even minutes from
// `spec_non`, label 0; odd from `spec_sa`, label 1), forming a linearly
// separable toy classification task.
SynthResult generate_labeled_pair(const SynthSpec& spec_sa, const SynthSpec& spec_non,
                                  int n_minutes);

// Deterministic uniforms/normals with a stable cross-run sequence.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9E3779B97F4A7C15ull) {}
    uint64_t next_u64();
    double uniform();  // [0, 1)
    double normal();   // Box-Muller

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace apnea

#endif
