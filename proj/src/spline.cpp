#include "apnea/spline.hpp"

#include <algorithm>
#include <stdexcept>

namespace apnea {

CubicSpline CubicSpline::fit(std::span<const double> t, std::span<const double> y) {
    const size_t n = t.size();
    if (n != y.size()) throw std::invalid_argument("knot time/value length mismatch");
    if (n < 2) throw std::invalid_argument("spline needs at least 2 knots");
    for (size_t i = 1; i < n; ++i) {
        if (t[i] == t[i - 1]) throw std::invalid_argument("duplicate knot times");
        if (t[i] < t[i - 1]) throw std::invalid_argument("knot times must be increasing");
    }

    CubicSpline s;
    s.t_.assign(t.begin(), t.end());
    s.y_.assign(y.begin(), y.end());
    s.m_.assign(n, 0.0);
    if (n == 2) return s;  // degenerates to a line

    // Thomas solve of the tridiagonal system for interior second derivatives.
    std::vector<double> diag(n), rhs(n), upper(n);
    diag[0] = 1.0;
    upper[0] = 0.0;
    rhs[0] = 0.0;
    for (size_t i = 1; i + 1 < n; ++i) {
        double h0 = t[i] - t[i - 1];
        double h1 = t[i + 1] - t[i];
        double lower = h0 / 6.0;
        diag[i] = (h0 + h1) / 3.0;
        upper[i] = h1 / 6.0;
        rhs[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        double w = lower / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    s.m_[n - 1] = 0.0;
    for (size_t i = n - 1; i-- > 1;) s.m_[i] = (rhs[i] - upper[i] * s.m_[i + 1]) / diag[i];
    return s;
}

double CubicSpline::eval(double t) const {
    if (t <= t_.front()) return y_.front();
    if (t >= t_.back()) return y_.back();
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    size_t i = static_cast<size_t>(it - t_.begin()) - 1;
    double h = t_[i + 1] - t_[i];
    double a = (t_[i + 1] - t) / h;
    double b = (t - t_[i]) / h;
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

std::vector<double> interpolate_to_900(std::span<const double> t, std::span<const double> y) {
    if (t.size() < 4) throw std::invalid_argument("interpolation needs at least 4 knots");
    if (t.front() < 0.0 || t.back() > kSegmentSeconds)
        throw std::invalid_argument("knot times must lie inside [0, 300] s");
    CubicSpline s = CubicSpline::fit(t, y);
    std::vector<double> out(kFeaturePoints);
    for (int j = 0; j < kFeaturePoints; ++j)
        out[j] = s.eval(kSegmentSeconds * j / (kFeaturePoints - 1.0));
    return out;
}

}  // namespace apnea
