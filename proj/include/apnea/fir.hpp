#ifndef APNEA_FIR_HPP
#define APNEA_FIR_HPP

// Linear-phase FIR band-pass filtering for QRS-band isolation.

#include <span>
#include <vector>

namespace apnea {

struct FirSpec {
    double f_low = 8.0;    // Hz
    double f_high = 12.0;  // Hz
    int order = 100;       // taps - 1, must be even (type-I linear phase)
    double fs = 100.0;     // Hz
};

// Windowed-sinc (Hamming) band-pass design. Taps are symmetric, scaled to
// unit gain at the geometric mid-band, then mean-subtracted so the DC gain
// is exactly zero. Throws std::invalid_argument on bad band edges or an
// odd/non-positive order.
std::vector<double> design_bandpass(const FirSpec& spec);

// |H(f)| of a tap vector at a single probe frequency.
double magnitude_at(std::span<const double> taps, double f_hz, double fs);

// Forward-backward filtering with mirror padding of one filter length at
// each edge. Output has the input's length and zero net group delay, so
// peak positions in filtered and raw signals align. Requires
// signal.size() > taps.size().
std::vector<double> filter_zero_phase(std::span<const double> signal,
                                      std::span<const double> taps);

}  // namespace apnea

#endif
