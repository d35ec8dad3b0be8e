#ifndef APNEA_SPLINE_HPP
#define APNEA_SPLINE_HPP

#include <span>
#include <vector>

namespace apnea {

// Natural cubic spline interpolant (zero second derivative at both ends).
// Evaluation outside [t_first, t_last] clamps to the boundary knot value.
class CubicSpline {
public:
    // Knot times must be strictly increasing; duplicates throw
    // std::invalid_argument. Needs at least 2 knots.
    static CubicSpline fit(std::span<const double> t, std::span<const double> y);

    double eval(double t) const;

private:
    std::vector<double> t_, y_, m_;  // m_: second derivatives at knots
};

inline constexpr int kFeaturePoints = 900;
inline constexpr double kSegmentSeconds = 300.0;

// Natural spline through the knots, sampled at the 900 uniform times
// t_j = 300*j/899. Requires >= 4 knots with strictly increasing times
// inside [0, 300].
std::vector<double> interpolate_to_900(std::span<const double> t, std::span<const double> y);

}  // namespace apnea

#endif
