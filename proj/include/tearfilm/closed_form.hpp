#pragma once

#include <functional>

#include "tearfilm/model.hpp"

namespace tearfilm {

// Adaptive Simpson quadrature, absolute tolerance `tol`. Deliberately
// independent of the ODE machinery so it can cross-check it.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-12);

// Exact solution for zero osmosis:
//   m(t) = exp(-G(t)),  h(t) = m(t) * (1 - evap * integral_0^t exp(G(s)) ds)
// with G the strain integral. Throws if osmosis != 0 is requested or the
// film has vanished by time t.
State closed_form_state(const ModelParams& params, double osmosis, double t);

// Equilibrium concentration where osmotic inflow balances evaporation,
// 1 + evap/osmosis. Flow does not move it (flow advects water and solute
// alike). Requires osmosis > 0.
double osmolarity_equilibrium(double evap, double osmosis);

} // namespace tearfilm
