#include "apnea/peaks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace apnea {

namespace {

size_t ms_to_samples(double ms, int fs) {
    return static_cast<size_t>(std::lround(ms * fs / 1000.0));
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Candidate peak of the detection envelope.
struct Candidate {
    size_t idx;
    double height;
};

}  // namespace

std::vector<size_t> detect_r_peaks(std::span<const double> signal, int fs,
                                   const HamiltonConfig& cfg) {
    if (fs <= 0) throw std::invalid_argument("fs must be positive");
    const size_t n = signal.size();
    const auto init_len = static_cast<size_t>(2 * fs);
    if (n < init_len) throw std::invalid_argument("signal too short to initialize thresholds (< 2 s)");

    // Differentiate, rectify, smooth into an energy envelope.
    std::vector<double> env(n, 0.0);
    {
        std::vector<double> rect(n, 0.0);
        for (size_t i = 0; i + 1 < n; ++i) rect[i] = std::abs(signal[i + 1] - signal[i]);
        size_t w = std::max<size_t>(1, ms_to_samples(cfg.envelope_ms, fs));
        size_t half = w / 2;
        double acc = 0.0;
        // centered moving average, windows clipped at the edges
        for (size_t i = 0; i < std::min(n, half); ++i) acc += rect[i];
        for (size_t i = 0; i < n; ++i) {
            if (i + half < n) acc += rect[i + half];
            if (i > half) acc -= rect[i - half - 1];
            size_t lo = i > half ? i - half : 0;
            size_t hi = std::min(n - 1, i + half);
            env[i] = acc / static_cast<double>(hi - lo + 1);
        }
    }

    const size_t refractory = std::max<size_t>(1, ms_to_samples(cfg.refractory_ms, fs));

    // Envelope local maxima, consolidated so that only the largest
    // candidate inside any refractory window survives (there is one QRS
    // per 200 ms; the band-passed complex rings at the passband period
    // and would otherwise shed a candidate every half ring).
    std::vector<Candidate> cands;
    {
        std::vector<Candidate> raw;
        for (size_t i = 1; i + 1 < n; ++i)
            if (env[i] > env[i - 1] && env[i] >= env[i + 1] && env[i] > 0.0)
                raw.push_back({i, env[i]});
        for (size_t k = 0; k < raw.size(); ++k) {
            bool dominated = false;
            for (size_t j = k; j-- > 0;) {
                if (raw[k].idx - raw[j].idx > refractory) break;
                if (raw[j].height >= raw[k].height) dominated = true;
            }
            for (size_t j = k + 1; !dominated && j < raw.size(); ++j) {
                if (raw[j].idx - raw[k].idx > refractory) break;
                if (raw[j].height > raw[k].height) dominated = true;
            }
            if (!dominated) cands.push_back(raw[k]);
        }
    }

    // Running peak/noise estimates: medians of the last eight entries.
    std::vector<double> qrs_buf, noise_buf;
    auto push8 = [](std::vector<double>& buf, double v) {
        buf.push_back(v);
        if (buf.size() > 8) buf.erase(buf.begin());
    };

    // Initialization from the first two seconds of envelope.
    {
        double head_max = 0.0;
        std::vector<double> head(env.begin(), env.begin() + static_cast<std::ptrdiff_t>(init_len));
        for (size_t i = 0; i < init_len; ++i) head_max = std::max(head_max, env[i]);
        push8(qrs_buf, head_max);
        push8(noise_buf, std::min(median_of(std::move(head)), 0.5 * head_max));
    }

    auto threshold = [&] {
        double q = median_of(qrs_buf);
        double nz = median_of(noise_buf);
        return nz + cfg.threshold_fraction * (q - nz);
    };

    std::vector<size_t> beats;
    std::vector<double> rr_hist;
    bool have_sb = false;
    Candidate sb_best{0, 0.0};

    auto accept = [&](const Candidate& c) {
        if (!beats.empty()) {
            rr_hist.push_back(static_cast<double>(c.idx - beats.back()));
            if (rr_hist.size() > 8) rr_hist.erase(rr_hist.begin());
        }
        beats.push_back(c.idx);
        push8(qrs_buf, c.height);
        have_sb = false;
        sb_best = {0, 0.0};
    };

    for (const Candidate& c : cands) {
        // Search-back: no beat for 1.5x the median RR, revisit the best
        // rejected candidate at half threshold.
        if (!beats.empty() && rr_hist.size() >= 2) {
            double rr_med = median_of(rr_hist);
            if (have_sb && static_cast<double>(c.idx - beats.back()) >
                               cfg.searchback_rr_factor * rr_med &&
                sb_best.height > 0.5 * threshold() &&
                sb_best.idx > beats.back() + refractory) {
                accept(sb_best);
            }
        }

        if (!beats.empty() && c.idx < beats.back() + refractory) continue;

        if (c.height > threshold()) {
            accept(c);
        } else {
            push8(noise_buf, c.height);
            if (!have_sb || c.height > sb_best.height) {
                sb_best = c;
                have_sb = true;
            }
        }
    }

    // Envelope peaks mark QRS energy; snap each to the R maximum of the
    // signal inside a refinement window.
    const size_t refine = ms_to_samples(cfg.refine_ms, fs);
    std::vector<size_t> refined;
    refined.reserve(beats.size());
    for (size_t b : beats) {
        size_t lo = b > refine ? b - refine : 0;
        size_t hi = std::min(n - 1, b + refine);
        size_t best = lo;
        for (size_t i = lo + 1; i <= hi; ++i)
            if (signal[i] > signal[best]) best = i;
        refined.push_back(best);
    }

    // Refinement can collide neighbors; keep the first of any cluster.
    std::vector<size_t> out;
    for (size_t idx : refined)
        if (out.empty() || idx >= out.back() + refractory) out.push_back(idx);
    return out;
}

RrCorrectionResult correct_rr(std::span<const size_t> r_idx, int fs, const RrBounds& bounds) {
    if (fs <= 0) throw std::invalid_argument("fs must be positive");
    if (!(bounds.rr_min > 0 && bounds.rr_min < bounds.rr_max))
        throw std::invalid_argument("bounds must satisfy 0 < rr_min < rr_max");
    if (bounds.window < 3 || bounds.window % 2 == 0)
        throw std::invalid_argument("median window must be odd and >= 3");
    for (size_t i = 1; i < r_idx.size(); ++i)
        if (r_idx[i] <= r_idx[i - 1])
            throw std::invalid_argument("r_idx must be strictly increasing");

    RrCorrectionResult res;
    res.r_idx.assign(r_idx.begin(), r_idx.end());

    if (r_idx.size() < static_cast<size_t>(bounds.window) + 1) {
        res.too_few_beats = true;
        res.success = false;
        return res;
    }

    auto intervals = [&](const std::vector<size_t>& beats) {
        std::vector<double> rr(beats.size() - 1);
        for (size_t i = 0; i + 1 < beats.size(); ++i)
            rr[i] = static_cast<double>(beats[i + 1] - beats[i]) / fs;
        return rr;
    };

    auto local_median = [&](const std::vector<double>& rr, size_t k) {
        size_t half = static_cast<size_t>(bounds.window) / 2;
        size_t lo = k > half ? k - half : 0;
        size_t hi = std::min(rr.size() - 1, k + half);
        std::vector<double> win(rr.begin() + static_cast<std::ptrdiff_t>(lo),
                                rr.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
        // Clamp: a median dragged out of bounds by corrupt windows is no
        // yardstick for merge/insert decisions.
        return std::clamp(median_of(std::move(win)), bounds.rr_min, bounds.rr_max);
    };

    const size_t max_iters = 4 * res.r_idx.size() + 16;
    size_t iter = 0;
    while (iter++ < max_iters) {
        if (res.r_idx.size() < 2) break;
        std::vector<double> rr = intervals(res.r_idx);
        size_t k = rr.size();
        for (size_t i = 0; i < rr.size(); ++i)
            if (rr[i] < bounds.rr_min || rr[i] > bounds.rr_max) {
                k = i;
                break;
            }
        if (k == rr.size()) {
            res.success = true;
            break;
        }

        double m = local_median(rr, k);
        if (rr[k] < bounds.rr_min) {
            // False-peak suspect: merge with the neighbor that brings the
            // merged interval closest to the local median.
            bool has_prev = k > 0;
            bool has_next = k + 1 < rr.size();
            if (!has_prev && !has_next) {
                // Lone short interval: drop the later beat.
                res.r_idx.erase(res.r_idx.begin() + static_cast<std::ptrdiff_t>(k + 1));
                ++res.n_dropped;
                continue;
            }
            double d_prev = has_prev ? std::abs(rr[k - 1] + rr[k] - m) : 0.0;
            double d_next = has_next ? std::abs(rr[k] + rr[k + 1] - m) : 0.0;
            bool merge_prev = has_prev && (!has_next || d_prev <= d_next);
            // Removing beat k merges with the predecessor interval;
            // removing beat k+1 merges with the successor interval.
            size_t victim = merge_prev ? k : k + 1;
            res.r_idx.erase(res.r_idx.begin() + static_cast<std::ptrdiff_t>(victim));
            ++res.n_merged;
        } else {
            // Missed-beat suspect: subdivide the gap.
            auto n_insert = static_cast<long>(std::llround(rr[k] / m)) - 1;
            if (n_insert < 1) {
                if (rr[k] / 2.0 >= bounds.rr_min) {
                    n_insert = 1;
                } else {
                    res.r_idx.erase(res.r_idx.begin() + static_cast<std::ptrdiff_t>(k + 1));
                    ++res.n_dropped;
                    continue;
                }
            }
            size_t lo = res.r_idx[k];
            size_t hi = res.r_idx[k + 1];
            std::vector<size_t> inserted;
            for (long j = 1; j <= n_insert; ++j) {
                double pos = lo + (static_cast<double>(hi - lo) * j) / (n_insert + 1);
                inserted.push_back(static_cast<size_t>(std::llround(pos)));
            }
            res.r_idx.insert(res.r_idx.begin() + static_cast<std::ptrdiff_t>(k + 1),
                             inserted.begin(), inserted.end());
            res.n_inserted += inserted.size();
        }
    }

    return res;
}

std::vector<size_t> detect_s_peaks(std::span<const double> signal,
                                   std::span<const size_t> r_idx) {
    const size_t n = signal.size();
    std::vector<size_t> s_idx;
    s_idx.reserve(r_idx.size());
    for (size_t r : r_idx) {
        if (r >= n) throw std::invalid_argument("R index out of range");
        if (r + 1 >= n) break;  // no room to walk; ends the scan
        size_t cnt = r;
        bool hit_end = false;
        while (signal[cnt] > signal[cnt + 1]) {
            ++cnt;
            if (cnt + 1 >= n) {
                hit_end = true;
                break;
            }
        }
        if (hit_end) continue;  // descent ran off the signal: no S peak
        s_idx.push_back(cnt);
    }
    return s_idx;
}

ConfusionCounts evaluate_peak_detection(std::span<const size_t> detected,
                                        std::span<const size_t> truth, double tolerance_ms,
                                        int fs) {
    if (fs <= 0) throw std::invalid_argument("fs must be positive");
    for (size_t i = 1; i < truth.size(); ++i)
        if (truth[i] <= truth[i - 1])
            throw std::invalid_argument("truth indices must be strictly increasing");

    std::vector<size_t> det(detected.begin(), detected.end());
    std::sort(det.begin(), det.end());

    auto tol = static_cast<double>(tolerance_ms) * fs / 1000.0;
    ConfusionCounts c;
    size_t i = 0, j = 0;
    while (i < truth.size() && j < det.size()) {
        double diff = static_cast<double>(det[j]) - static_cast<double>(truth[i]);
        if (std::abs(diff) <= tol) {
            ++c.tp;
            ++i;
            ++j;
        } else if (diff < 0) {
            ++c.fp;  // detection before the tolerance window of truth[i]
            ++j;
        } else {
            ++c.fn;  // truth[i] has no detection in reach
            ++i;
        }
    }
    c.fp += det.size() - j;
    c.fn += truth.size() - i;
    return c;
}

BeatSeries detect_beats(std::span<const double> filtered, int fs, const HamiltonConfig& ham,
                        const RrBounds& bounds) {
    BeatSeries bs;
    bs.fs = fs;

    std::vector<size_t> r = detect_r_peaks(filtered, fs, ham);
    RrCorrectionResult corr = correct_rr(r, fs, bounds);
    std::vector<size_t> s = detect_s_peaks(filtered, corr.r_idx);

    // Pair beat k's R with its S; drop beats that lost their S to the
    // end-of-signal break or collided on the same trough.
    for (size_t k = 0; k < s.size(); ++k) {
        if (!bs.s_idx.empty() && s[k] <= bs.s_idx.back()) continue;
        bs.r_idx.push_back(corr.r_idx[k]);
        bs.r_amp.push_back(filtered[corr.r_idx[k]]);
        bs.s_idx.push_back(s[k]);
        bs.s_amp.push_back(filtered[s[k]]);
    }
    return bs;
}

}  // namespace apnea
