#include "apnea/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace apnea {

uint64_t Rng::next_u64() {
    // splitmix64: stable across platforms, unlike std distributions
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

namespace {

void validate(const SynthSpec& spec) {
    if (spec.fs <= 0) throw std::invalid_argument("fs must be positive");
    if (!(spec.duration_s > 0)) throw std::invalid_argument("duration must be positive");
    auto check_rate = [](double bpm) {
        if (!(bpm >= 20.0 && bpm <= 240.0))
            throw std::invalid_argument("heart rate outside [20, 240] bpm");
    };
    if (spec.bpm_profile.empty())
        check_rate(spec.heart_rate_bpm);
    else
        for (double bpm : spec.bpm_profile) check_rate(bpm);
}

double rate_at(const SynthSpec& spec, double t_s) {
    if (spec.bpm_profile.empty()) return spec.heart_rate_bpm;
    auto m = static_cast<size_t>(t_s / 60.0);
    return spec.bpm_profile[std::min(m, spec.bpm_profile.size() - 1)];
}

// Adds a Gaussian bump and returns nothing; tails beyond 5 sigma are dropped.
void add_bump(std::vector<double>& sig, double center_idx, double amp, double sigma_samples) {
    auto lo = static_cast<long>(std::floor(center_idx - 5.0 * sigma_samples));
    auto hi = static_cast<long>(std::ceil(center_idx + 5.0 * sigma_samples));
    lo = std::max(lo, 0L);
    hi = std::min(hi, static_cast<long>(sig.size()) - 1);
    for (long i = lo; i <= hi; ++i) {
        double d = (static_cast<double>(i) - center_idx) / sigma_samples;
        sig[static_cast<size_t>(i)] += amp * std::exp(-0.5 * d * d);
    }
}

// Clean template train plus ground truth; noise added by the caller.
void place_beats(const SynthSpec& spec, double t_offset_s, double duration_s,
                 std::vector<double>& sig, size_t sig_offset, BeatSeries& truth) {
    const int fs = spec.fs;
    const double r_sigma = spec.r_sigma_ms * fs / 1000.0;
    const double s_sigma = spec.s_sigma_ms * fs / 1000.0;
    const auto s_lag = static_cast<size_t>(std::lround(spec.s_lag_ms * fs / 1000.0));
    const auto n_local = static_cast<size_t>(std::llround(duration_s * fs));

    double t = 0.0;  // local time within this stretch
    while (true) {
        auto r_local = static_cast<size_t>(std::llround(t * fs));
        size_t s_local = r_local + s_lag;
        if (s_local >= n_local) break;
        size_t r_abs = sig_offset + r_local;
        size_t s_abs = sig_offset + s_local;
        add_bump(sig, static_cast<double>(r_abs), spec.r_amp_mv, r_sigma);
        add_bump(sig, static_cast<double>(s_abs), -spec.s_amp_mv, s_sigma);
        truth.r_idx.push_back(r_abs);
        truth.s_idx.push_back(s_abs);
        t += 60.0 / rate_at(spec, t_offset_s + t);
    }
}

void finalize_truth(const std::vector<double>& clean, BeatSeries& truth) {
    // Ground truth must coincide with the clean signal's extrema inside
    // each beat window; anything else is a generator bug.
    const size_t n_beats = truth.r_idx.size();
    for (size_t k = 0; k < n_beats; ++k) {
        size_t lo = k == 0 ? 0 : (truth.r_idx[k - 1] + truth.r_idx[k]) / 2 + 1;
        size_t hi = k + 1 < n_beats ? (truth.r_idx[k] + truth.r_idx[k + 1]) / 2
                                    : clean.size() - 1;
        size_t amax = lo, amin = lo;
        for (size_t i = lo; i <= hi; ++i) {
            if (clean[i] > clean[amax]) amax = i;
            if (clean[i] < clean[amin]) amin = i;
        }
        if (amax != truth.r_idx[k] || amin != truth.s_idx[k])
            throw std::logic_error("synth ground truth does not match signal extrema");
        truth.r_amp.push_back(clean[truth.r_idx[k]]);
        truth.s_amp.push_back(clean[truth.s_idx[k]]);
    }
}

void add_noise(std::vector<double>& sig, size_t lo, size_t hi, double snr_db, Rng& rng) {
    double power = 0.0;
    for (size_t i = lo; i < hi; ++i) power += sig[i] * sig[i];
    power /= static_cast<double>(hi - lo);
    double noise_std = std::sqrt(power) / std::pow(10.0, snr_db / 20.0);
    for (size_t i = lo; i < hi; ++i) sig[i] += noise_std * rng.normal();
}

}  // namespace

SynthResult generate(const SynthSpec& spec) {
    validate(spec);
    SynthResult out;
    out.record.record_id = "synth";
    out.record.fs = spec.fs;
    out.truth.fs = spec.fs;

    auto n = static_cast<size_t>(std::llround(spec.duration_s * spec.fs));
    out.record.samples.assign(n, 0.0);
    place_beats(spec, 0.0, spec.duration_s, out.record.samples, 0, out.truth);
    finalize_truth(out.record.samples, out.truth);

    if (spec.noise_snr_db) {
        Rng rng(spec.seed);
        add_noise(out.record.samples, 0, n, *spec.noise_snr_db, rng);
    }
    return out;
}

SynthResult generate_labeled_pair(const SynthSpec& spec_sa, const SynthSpec& spec_non,
                                  int n_minutes) {
    validate(spec_sa);
    validate(spec_non);
    if (spec_sa.fs != spec_non.fs)
        throw std::invalid_argument("labeled pair specs must share fs");
    if (n_minutes < 0) throw std::invalid_argument("n_minutes must be >= 0");

    SynthResult out;
    out.record.record_id = "synth";
    out.record.fs = spec_sa.fs;
    out.truth.fs = spec_sa.fs;

    const auto spm = static_cast<size_t>(spec_sa.fs) * 60;
    out.record.samples.assign(spm * static_cast<size_t>(n_minutes), 0.0);
    out.record.labels.resize(static_cast<size_t>(n_minutes));

    for (int m = 0; m < n_minutes; ++m) {
        bool sa = (m % 2) == 1;
        out.record.labels[static_cast<size_t>(m)] = sa ? 1 : 0;
        const SynthSpec& spec = sa ? spec_sa : spec_non;
        place_beats(spec, 0.0, 60.0, out.record.samples, static_cast<size_t>(m) * spm,
                    out.truth);
    }
    finalize_truth(out.record.samples, out.truth);

    Rng rng(spec_sa.seed ^ (spec_non.seed * 0x9E3779B97F4A7C15ull + 0x632BE59BD9B4E019ull));
    for (int m = 0; m < n_minutes; ++m) {
        const SynthSpec& spec = (m % 2) == 1 ? spec_sa : spec_non;
        if (spec.noise_snr_db)
            add_noise(out.record.samples, static_cast<size_t>(m) * spm,
                      static_cast<size_t>(m + 1) * spm, *spec.noise_snr_db, rng);
    }
    return out;
}

}  // namespace apnea
