#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <random>

#include "apnea/spline.hpp"

using namespace apnea;

TEST_CASE("spline reproduces knot values exactly") {
    std::vector<double> t = {0.0, 40.0, 100.0, 180.0, 300.0};
    std::vector<double> y = {1.0, -2.0, 0.5, 3.0, -1.0};
    CubicSpline s = CubicSpline::fit(t, y);
    for (size_t i = 0; i < t.size(); ++i) CHECK(s.eval(t[i]) == doctest::Approx(y[i]).epsilon(1e-14));
}

TEST_CASE("evaluation clamps outside the knot span") {
    std::vector<double> t = {10.0, 20.0, 30.0, 40.0};
    std::vector<double> y = {5.0, 1.0, 2.0, -3.0};
    CubicSpline s = CubicSpline::fit(t, y);
    CHECK(s.eval(0.0) == 5.0);
    CHECK(s.eval(9.999) == 5.0);
    CHECK(s.eval(40.0001) == -3.0);
    CHECK(s.eval(300.0) == -3.0);
}

TEST_CASE("duplicate or decreasing knot times throw") {
    std::vector<double> t = {0.0, 10.0, 10.0, 20.0};
    std::vector<double> y = {1.0, 2.0, 3.0, 4.0};
    CHECK_THROWS_AS(CubicSpline::fit(t, y), std::invalid_argument);
    std::vector<double> t2 = {0.0, 10.0, 5.0, 20.0};
    CHECK_THROWS_AS(CubicSpline::fit(t2, y), std::invalid_argument);
}

TEST_CASE("interpolate_to_900 emits exactly 900 values") {
    std::vector<double> t = {0.0, 100.0, 200.0, 300.0};
    std::vector<double> y = {0.0, 1.0, -1.0, 0.0};
    auto out = interpolate_to_900(t, y);
    CHECK(out.size() == 900);
}

TEST_CASE("constant knots give a constant 900-vector") {
    std::vector<double> t = {0.0, 90.0, 200.0, 280.0};
    std::vector<double> y(4, 2.5);
    auto out = interpolate_to_900(t, y);
    for (double v : out) CHECK(v == doctest::Approx(2.5).epsilon(1e-13));
}

TEST_CASE("interpolation at the 900-point grid itself is the identity") {
    std::vector<double> t(kFeaturePoints), y(kFeaturePoints);
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (int j = 0; j < kFeaturePoints; ++j) {
        t[j] = kSegmentSeconds * j / (kFeaturePoints - 1.0);
        y[j] = dist(rng);
    }
    auto out = interpolate_to_900(t, y);
    for (int j = 0; j < kFeaturePoints; ++j) CHECK(out[j] == y[j]);
}

TEST_CASE("natural spline reproduces a sampled cubic on the interior span") {
    // boundary-condition error decays away from the ends; 150 knots push
    // it far below the tolerance on the interior 80%
    auto poly = [](double t) {
        double u = (t - 150.0) / 150.0;
        return 2.0 + t / 300.0 + u * u * u - 0.5 * u * u;
    };
    const int n_knots = 150;
    std::vector<double> t(n_knots), y(n_knots);
    for (int i = 0; i < n_knots; ++i) {
        t[i] = kSegmentSeconds * i / (n_knots - 1.0);
        y[i] = poly(t[i]);
    }
    auto out = interpolate_to_900(t, y);
    for (int j = 0; j < kFeaturePoints; ++j) {
        double tj = kSegmentSeconds * j / (kFeaturePoints - 1.0);
        if (tj < 0.1 * kSegmentSeconds || tj > 0.9 * kSegmentSeconds) continue;
        double expected = poly(tj);
        CHECK(std::abs(out[j] - expected) <= 1e-8 * std::abs(expected));
    }
}

TEST_CASE("interpolate_to_900 enforces its preconditions") {
    std::vector<double> t3 = {0.0, 10.0, 20.0};
    std::vector<double> y3 = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(interpolate_to_900(t3, y3), std::invalid_argument);
    std::vector<double> t_out = {-1.0, 10.0, 20.0, 30.0};
    std::vector<double> y4 = {1.0, 2.0, 3.0, 4.0};
    CHECK_THROWS_AS(interpolate_to_900(t_out, y4), std::invalid_argument);
    std::vector<double> t_hi = {0.0, 10.0, 20.0, 301.0};
    CHECK_THROWS_AS(interpolate_to_900(t_hi, y4), std::invalid_argument);
}
