#pragma once

#include <vector>

#include "tearfilm/model.hpp"
#include "tearfilm/solve.hpp"

namespace tearfilm {

// Fluorescein emission in the self-quenching regime:
//   I(h, c) = i0 * (1 - exp(-depth * h * f)) / (1 + f^2),  f = f0 * c
// i0 is fixed so that I = 1 at the initial state h = c = 1; it is never
// fitted. Concentrations are relative to the critical concentration.
struct IntensityModel {
    double optical_depth = 0.0;
    double f0 = 0.0;
    double i0 = 0.0;
};

IntensityModel make_intensity_model(double optical_depth, double f0);

double intensity(const IntensityModel& im, double h, double c);

// Analytic dI/dt along a model trajectory; drives the sustained-increase
// monitor during fitting.
double intensity_rate(const IntensityModel& im, const ModelParams& params,
                      double osmosis, double t, const State& x);

std::vector<double> intensity_series(const IntensityModel& im, const Trajectory& traj);

} // namespace tearfilm
