#include "apnea/fir.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace apnea {

namespace {

constexpr double kPi = std::numbers::pi;

// Ideal low-pass impulse response sample, cutoff fc, tap offset m from center.
double sinc_lowpass(double fc, double fs, double m) {
    double x = 2.0 * fc / fs;
    if (m == 0.0) return x;
    return x * std::sin(kPi * x * m) / (kPi * x * m);
}

}  // namespace

std::vector<double> design_bandpass(const FirSpec& spec) {
    if (!(spec.fs > 0)) throw std::invalid_argument("fs must be positive");
    if (!(spec.f_low > 0 && spec.f_low < spec.f_high && spec.f_high < spec.fs / 2))
        throw std::invalid_argument("band edges must satisfy 0 < f_low < f_high < fs/2");
    if (spec.order <= 0 || spec.order % 2 != 0)
        throw std::invalid_argument("order must be a positive even integer");

    const int n = spec.order + 1;
    const double mid = spec.order / 2.0;
    std::vector<double> taps(n);
    // computed for k <= order/2 and mirrored, so symmetry is exact
    for (int k = 0; k <= spec.order / 2; ++k) {
        double m = k - mid;
        double hamming = 0.54 - 0.46 * std::cos(2.0 * kPi * k / spec.order);
        double v = (sinc_lowpass(spec.f_high, spec.fs, m) - sinc_lowpass(spec.f_low, spec.fs, m)) *
                   hamming;
        taps[static_cast<size_t>(k)] = v;
        taps[static_cast<size_t>(spec.order - k)] = v;
    }

    // Unit gain at the geometric mid-band.
    double f_mid = std::sqrt(spec.f_low * spec.f_high);
    double g = magnitude_at(taps, f_mid, spec.fs);
    for (double& t : taps) t /= g;

    // Exact DC zero; a constant shift keeps the taps symmetric.
    double mean = 0.0;
    for (double t : taps) mean += t;
    mean /= n;
    for (double& t : taps) t -= mean;

    return taps;
}

double magnitude_at(std::span<const double> taps, double f_hz, double fs) {
    double w = 2.0 * kPi * f_hz / fs;
    double re = 0.0, im = 0.0;
    for (size_t k = 0; k < taps.size(); ++k) {
        re += taps[k] * std::cos(w * static_cast<double>(k));
        im -= taps[k] * std::sin(w * static_cast<double>(k));
    }
    return std::hypot(re, im);
}

std::vector<double> filter_zero_phase(std::span<const double> signal,
                                      std::span<const double> taps) {
    const size_t n = signal.size();
    const size_t len = taps.size();
    if (len == 0) throw std::invalid_argument("empty tap vector");
    if (n <= len) throw std::invalid_argument("signal shorter than filter");
    const size_t half = (len - 1) / 2;

    // Mirror padding about the first/last sample, excluding the sample itself.
    std::vector<double> x(n + 2 * len);
    for (size_t i = 0; i < len; ++i) x[i] = signal[len - i];
    for (size_t i = 0; i < n; ++i) x[len + i] = signal[i];
    for (size_t i = 0; i < len; ++i) x[len + n + i] = signal[n - 2 - i];

    auto pass = [&](const std::vector<double>& in) {
        std::vector<double> out(in.size(), 0.0);
        // Same-length convolution; the mirror pad absorbs all edge effects
        // that could reach the cropped interior.
        for (size_t i = 0; i < in.size(); ++i) {
            double acc = 0.0;
            size_t k_lo = (i + half >= in.size() - 1) ? i + half - (in.size() - 1) : 0;
            size_t k_hi = std::min(len - 1, i + half);
            for (size_t k = k_lo; k <= k_hi; ++k) acc += taps[k] * in[i + half - k];
            out[i] = acc;
        }
        return out;
    };

    std::vector<double> y = pass(x);
    std::reverse(y.begin(), y.end());
    y = pass(y);
    std::reverse(y.begin(), y.end());

    return std::vector<double>(y.begin() + static_cast<std::ptrdiff_t>(len),
                               y.begin() + static_cast<std::ptrdiff_t>(len + n));
}

}  // namespace apnea
