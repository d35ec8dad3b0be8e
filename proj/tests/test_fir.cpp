#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <numbers>
#include <random>

#include "apnea/fir.hpp"

using namespace apnea;

namespace {

std::vector<double> sinusoid(double f_hz, double fs, size_t n, double phase = 0.0) {
    std::vector<double> x(n);
    for (size_t i = 0; i < n; ++i)
        x[i] = std::sin(2.0 * std::numbers::pi * f_hz * static_cast<double>(i) / fs + phase);
    return x;
}

// Least-squares fit of a*sin(wt) + b*cos(wt); returns amplitude and phase.
std::pair<double, double> fit_sinusoid(const std::vector<double>& x, double f_hz, double fs) {
    double w = 2.0 * std::numbers::pi * f_hz / fs;
    double ss = 0, sc = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        ss += x[i] * std::sin(w * static_cast<double>(i));
        sc += x[i] * std::cos(w * static_cast<double>(i));
    }
    double n2 = static_cast<double>(x.size()) / 2.0;
    double a = ss / n2, b = sc / n2;
    return {std::hypot(a, b), std::atan2(b, a)};
}

}  // namespace

TEST_CASE("band-pass taps: DC zero, symmetry, probe magnitudes") {
    FirSpec spec{8.0, 12.0, 100, 100.0};
    auto taps = design_bandpass(spec);
    REQUIRE(taps.size() == 101);

    double sum = 0.0;
    for (double t : taps) sum += t;
    CHECK(std::abs(sum) < 1e-10);

    for (size_t k = 0; k < taps.size(); ++k) CHECK(taps[k] == taps[taps.size() - 1 - k]);

    // frozen from the tap DFT at the probe frequencies
    CHECK(magnitude_at(taps, 10.0, 100.0) == doctest::Approx(1.0).epsilon(0.1));
    CHECK(magnitude_at(taps, 10.0, 100.0) > 0.9);
    CHECK(magnitude_at(taps, 10.0, 100.0) < 1.1);
    CHECK(magnitude_at(taps, 0.5, 100.0) < 0.01);
    CHECK(magnitude_at(taps, 49.0, 100.0) < 0.01);
    // geometric mid-band pinned to unit gain by construction
    CHECK(magnitude_at(taps, std::sqrt(96.0), 100.0) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("design rejects invalid specs") {
    CHECK_THROWS_AS(design_bandpass({12.0, 8.0, 100, 100.0}), std::invalid_argument);
    CHECK_THROWS_AS(design_bandpass({0.0, 12.0, 100, 100.0}), std::invalid_argument);
    CHECK_THROWS_AS(design_bandpass({8.0, 55.0, 100, 100.0}), std::invalid_argument);
    CHECK_THROWS_AS(design_bandpass({8.0, 12.0, 101, 100.0}), std::invalid_argument);
    CHECK_THROWS_AS(design_bandpass({8.0, 12.0, 0, 100.0}), std::invalid_argument);
}

TEST_CASE("zero-phase filter: zero in, zero out; length preserved") {
    auto taps = design_bandpass({8.0, 12.0, 100, 100.0});
    std::vector<double> x(500, 0.0);
    auto y = filter_zero_phase(x, taps);
    REQUIRE(y.size() == x.size());
    for (double v : y) CHECK(v == 0.0);
}

TEST_CASE("zero-phase filter passes 10 Hz with aligned peaks") {
    auto taps = design_bandpass({8.0, 12.0, 100, 100.0});
    auto x = sinusoid(10.0, 100.0, 2000);
    auto y = filter_zero_phase(x, taps);

    // measure on the interior to stay clear of edge transients
    std::vector<double> xi(x.begin() + 300, x.end() - 300);
    std::vector<double> yi(y.begin() + 300, y.end() - 300);
    auto [ax, px] = fit_sinusoid(xi, 10.0, 100.0);
    auto [ay, py] = fit_sinusoid(yi, 10.0, 100.0);
    CHECK(ay == doctest::Approx(ax).epsilon(0.10));
    double dphi = std::remainder(py - px, 2.0 * std::numbers::pi);
    double delay_samples = std::abs(dphi) / (2.0 * std::numbers::pi * 10.0 / 100.0);
    CHECK(delay_samples < 1.0);
}

TEST_CASE("zero-phase filter kills 0.3 Hz baseline wander") {
    auto taps = design_bandpass({8.0, 12.0, 100, 100.0});
    auto x = sinusoid(0.3, 100.0, 4000);
    auto y = filter_zero_phase(x, taps);
    double rms_x = 0, rms_y = 0;
    for (size_t i = 500; i + 500 < x.size(); ++i) {
        rms_x += x[i] * x[i];
        rms_y += y[i] * y[i];
    }
    CHECK(std::sqrt(rms_y) < 0.01 * std::sqrt(rms_x));
}

TEST_CASE("filtering is linear") {
    auto taps = design_bandpass({8.0, 12.0, 100, 100.0});
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> x(600), y(600), z(600);
    for (size_t i = 0; i < x.size(); ++i) {
        x[i] = dist(rng);
        y[i] = dist(rng);
    }
    double a = 1.7, b = -0.4;
    for (size_t i = 0; i < x.size(); ++i) z[i] = a * x[i] + b * y[i];

    auto fx = filter_zero_phase(x, taps);
    auto fy = filter_zero_phase(y, taps);
    auto fz = filter_zero_phase(z, taps);
    double scale = 0.0;
    for (double v : fz) scale = std::max(scale, std::abs(v));
    for (size_t i = 0; i < z.size(); ++i)
        CHECK(std::abs(fz[i] - (a * fx[i] + b * fy[i])) <= 1e-9 * std::max(1.0, scale));
}

TEST_CASE("filtering is time-invariant away from the edges") {
    auto taps = design_bandpass({8.0, 12.0, 100, 100.0});
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> x(900);
    for (auto& v : x) v = dist(rng);

    const size_t shift = 17;
    std::vector<double> xs(x.size(), 0.0);
    for (size_t i = 0; i + shift < x.size(); ++i) xs[i + shift] = x[i];

    auto fx = filter_zero_phase(x, taps);
    auto fxs = filter_zero_phase(xs, taps);
    size_t margin = 2 * taps.size() + shift;
    for (size_t i = margin; i + margin < x.size(); ++i)
        CHECK(fxs[i + shift] == doctest::Approx(fx[i]).epsilon(1e-9));
}

TEST_CASE("filtering is deterministic") {
    auto taps = design_bandpass({8.0, 12.0, 100, 100.0});
    auto x = sinusoid(9.0, 100.0, 700, 0.3);
    CHECK(filter_zero_phase(x, taps) == filter_zero_phase(x, taps));
}

TEST_CASE("signal shorter than the filter is an error") {
    auto taps = design_bandpass({8.0, 12.0, 100, 100.0});
    std::vector<double> x(taps.size(), 1.0);
    CHECK_THROWS_AS(filter_zero_phase(x, taps), std::invalid_argument);
}
