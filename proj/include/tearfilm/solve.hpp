#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "tearfilm/model.hpp"

namespace tearfilm {

enum class Termination {
    none,               // reached the end of the requested grid
    breakup,            // thickness hit the termination floor
    sustained_increase, // a monitored rate stayed positive too long
    step_failure        // stepper could not continue (step-size underflow, NaN)
};

inline const char* to_string(Termination t) {
    switch (t) {
        case Termination::none: return "none";
        case Termination::breakup: return "breakup";
        case Termination::sustained_increase: return "sustained_increase";
        case Termination::step_failure: return "step_failure";
    }
    return "?";
}

struct SolveOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-11;
    double thickness_floor = 1e-6;  // full-thickness breakup threshold
    // Duration a monitored rate must stay positive to abort the solve.
    // Zero disables increase monitoring entirely.
    double sustained_window = 0.0;
    // Optional second monitored rate, e.g. the intensity rate. Only consulted
    // when sustained_window > 0.
    std::function<double(double, const State&)> aux_rate;
    double max_dt = 0.05;
    std::size_t max_steps = 1000000;
};

// Solution sampled on the requested grid. If integration stops early the
// sample vectors are truncated to the times actually covered; end_time is
// where it stopped.
struct Trajectory {
    std::vector<double> t;
    std::vector<double> h;
    std::vector<double> m;
    Termination termination = Termination::none;
    double end_time = 0.0;

    bool terminated() const { return termination != Termination::none; }
    double conc(std::size_t i) const { return m[i] / h[i]; }
    std::vector<double> conc_series() const {
        std::vector<double> c(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) c[i] = m[i] / h[i];
        return c;
    }
};

// Integrates h' = -g h + osmosis (m/h - 1) - evap, m' = -g m from h = m = 1,
// sampling at `times` (strictly increasing, starting at 0). Increase and
// floor events are located on the dense interpolant.
Trajectory solve(const ModelParams& params, double osmosis,
                 const std::vector<double>& times, const SolveOptions& opts = {});

} // namespace tearfilm
