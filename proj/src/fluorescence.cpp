#include "tearfilm/fluorescence.hpp"

#include <cmath>
#include <stdexcept>

namespace tearfilm {

IntensityModel make_intensity_model(double optical_depth, double f0) {
    if (!(optical_depth > 0.0) || !(f0 > 0.0))
        throw std::invalid_argument("make_intensity_model: optical depth and f0 must be positive");
    IntensityModel im;
    im.optical_depth = optical_depth;
    im.f0 = f0;
    im.i0 = (1.0 + f0 * f0) / (-std::expm1(-optical_depth * f0));
    return im;
}

double intensity(const IntensityModel& im, double h, double c) {
    if (!(h >= 0.0) || !(c >= 0.0))
        throw std::domain_error("intensity: negative thickness or concentration");
    const double f = im.f0 * c;
    return im.i0 * -std::expm1(-im.optical_depth * h * f) / (1.0 + f * f);
}

double intensity_rate(const IntensityModel& im, const ModelParams& params,
                      double osmosis, double t, const State& x) {
    // hf = f0 * m so d(hf)/dt = -g f0 m; dc/dt = m (evap - osmosis (c-1)) / h^2.
    const double g = strain_rate(params.strain, t);
    const double h = x.h, m = x.m;
    const double c = m / h;
    const double f = im.f0 * c;
    const double u = im.optical_depth * h * f;
    const double absorbed = -std::expm1(-u);
    const double hf_rate = -g * im.f0 * m;
    const double f_rate = im.f0 * m * (params.evap - osmosis * (c - 1.0)) / (h * h);
    const double denom = 1.0 + f * f;
    return im.i0 *
           (std::exp(-u) * im.optical_depth * hf_rate * denom -
            absorbed * 2.0 * f * f_rate) /
           (denom * denom);
}

std::vector<double> intensity_series(const IntensityModel& im, const Trajectory& traj) {
    std::vector<double> out(traj.t.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = intensity(im, traj.h[i], traj.m[i] / traj.h[i]);
    return out;
}

} // namespace tearfilm
