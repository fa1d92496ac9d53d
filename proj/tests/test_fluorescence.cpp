#include <doctest.h>

#include <cmath>
#include <vector>

#include "tearfilm/constants.hpp"
#include "tearfilm/fluorescence.hpp"
#include "tearfilm/model.hpp"
#include "tearfilm/solve.hpp"

using namespace tearfilm;

namespace {

IntensityModel reference_model() {
    const auto g = derive_groups(make_scales(3.0, 3.0, 0.2));
    return make_intensity_model(g.optical_depth, 1.0);
}

} // namespace

TEST_CASE("normalization anchors the initial intensity at one") {
    const double depths[] = {0.279, 0.1, 0.6};
    const double f0s[] = {1.0, 0.4, 1.75};
    for (double depth : depths)
        for (double f0 : f0s) {
            const auto im = make_intensity_model(depth, f0);
            CHECK(intensity(im, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
        }

    // Frozen magnitudes of the normalization constant.
    CHECK(make_intensity_model(0.279, 1.0).i0 ==
          doctest::Approx(8.21491).epsilon(1e-4));
    CHECK(reference_model().i0 == doctest::Approx(8.21344).epsilon(1e-4));
}

TEST_CASE("endpoint intensity for pure evaporative thinning") {
    const auto im = reference_model();

    // Half thickness at doubled concentration: h*f equals the initial h*f0,
    // so the absorption factor cancels against i0 and I = 2/5 exactly.
    CHECK(intensity(im, 0.5, 2.0) == doctest::Approx(0.4).epsilon(1e-12));

    // Same endpoint reached dynamically (no osmosis, evaporation 0.5).
    ModelParams p;
    p.strain.kind = ModelKind::O;
    p.evap = 0.5;
    const auto traj = solve(p, 0.0, {0.0, 0.25, 0.5, 0.75, 1.0});
    const auto series = intensity_series(im, traj);
    CHECK(series.front() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(series.back() == doctest::Approx(0.4).epsilon(1e-8));
}

TEST_CASE("intensity grows with thickness and vanishes with the film") {
    const auto im = reference_model();

    CHECK(intensity(im, 0.0, 1.0) == 0.0);
    CHECK(intensity(im, 0.0, 3.7) == 0.0);
    CHECK(intensity(im, 1e-12, 1.0) < 1e-10);

    for (double c : {1.0, 1.8}) {
        double prev = intensity(im, 0.05, c);
        double prev_gap = prev;
        for (int i = 2; i <= 60; ++i) {
            const double cur = intensity(im, 0.05 * i, c);
            CHECK(cur > prev);
            // Diminishing returns as the film saturates the absorption.
            const double gap = cur - prev;
            CHECK(gap < prev_gap);
            prev_gap = gap;
            prev = cur;
        }
    }
}

TEST_CASE("self-quenching dims concentrated films") {
    const auto im = reference_model();
    const double concs[] = {1.0, 1.5, 2.0, 3.0, 5.0};
    double prev = intensity(im, 1.0, concs[0]);
    for (int i = 1; i < 5; ++i) {
        const double cur = intensity(im, 1.0, concs[i]);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("flow-only trajectories vary only through thickness") {
    // With no evaporation and no osmosis the concentration stays at one, so
    // the intensity is a pure function of h.
    const auto g = derive_groups(make_scales(3.0, 3.0, 0.14));
    const auto im = make_intensity_model(g.optical_depth, 0.7);
    ModelParams p;
    p.strain.kind = ModelKind::F;
    p.strain.rate = 1.0;
    std::vector<double> times;
    for (int i = 0; i <= 20; ++i) times.push_back(i / 20.0);
    const auto traj = solve(p, 0.0, times);
    const auto series = intensity_series(im, traj);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double expected = intensity(im, std::exp(-times[i]), 1.0);
        CHECK(series[i] == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("analytic intensity rate matches finite differences") {
    const auto g = derive_groups(make_scales(3.0, 3.0, 0.2));
    const auto im = make_intensity_model(g.optical_depth, 1.0);
    const double delta = 5e-6;

    SUBCASE("full model with osmosis") {
        ModelParams p;
        p.strain.kind = ModelKind::D;
        p.evap = 0.5;
        p.strain.rate = 0.4;
        p.strain.decay = 1.2;
        const auto traj =
            solve(p, g.osmosis, {0.0, 0.5 - delta, 0.5, 0.5 + delta, 1.0});
        const auto series = intensity_series(im, traj);
        const State x{traj.h[2], traj.m[2]};
        const double analytic = intensity_rate(im, p, g.osmosis, 0.5, x);
        const double fd = (series[3] - series[1]) / (2.0 * delta);
        CHECK(analytic == doctest::Approx(fd).epsilon(1e-5));
    }

    SUBCASE("flow only, isotonic") {
        ModelParams p;
        p.strain.kind = ModelKind::F;
        p.strain.rate = 0.8;
        const auto traj = solve(p, 0.0, {0.0, 0.5 - delta, 0.5, 0.5 + delta, 1.0});
        const auto series = intensity_series(im, traj);
        const State x{traj.h[2], traj.m[2]};
        const double analytic = intensity_rate(im, p, 0.0, 0.5, x);
        const double fd = (series[3] - series[1]) / (2.0 * delta);
        CHECK(analytic == doctest::Approx(fd).epsilon(1e-5));
    }

    SUBCASE("thinning dims the film from the start") {
        ModelParams p;
        p.strain.kind = ModelKind::O;
        p.evap = 0.5;
        const State x{1.0, 1.0};
        CHECK(intensity_rate(im, p, g.osmosis, 0.0, x) < 0.0);
    }
}

TEST_CASE("intensity model rejects bad inputs") {
    CHECK_THROWS_AS(make_intensity_model(0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_intensity_model(-0.3, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_intensity_model(0.279, 0.0), std::invalid_argument);

    const auto im = reference_model();
    CHECK_THROWS_AS(intensity(im, -1e-9, 1.0), std::domain_error);
    CHECK_THROWS_AS(intensity(im, 1.0, -0.5), std::domain_error);
}
