#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "tearfilm/constants.hpp"

namespace tearfilm {

// Model hierarchy for tear-film thinning within a fitted window:
//   O: evaporation + osmosis, no flow
//   F: adds a constant extensional strain rate
//   D: strain rate decays exponentially from its initial value
// D reduces to F when the decay constant is zero, F to O when the rate is zero.
enum class ModelKind { O, F, D };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::O: return "O";
        case ModelKind::F: return "F";
        case ModelKind::D: return "D";
    }
    return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "O") return ModelKind::O;
    if (s == "F") return ModelKind::F;
    if (s == "D") return ModelKind::D;
    throw std::invalid_argument("unknown model kind: " + s);
}

inline int param_count(ModelKind k) {
    switch (k) {
        case ModelKind::O: return 1;
        case ModelKind::F: return 2;
        case ModelKind::D: return 3;
    }
    return 0;
}

// Nondimensional strain-rate law g(t) on the unit interval.
// `rate` is the constant rate for F and the initial rate for D; `decay` is
// D's decay constant and must stay zero for O and F.
struct StrainParams {
    ModelKind kind = ModelKind::O;
    double rate = 0.0;
    double decay = 0.0;
};

inline double strain_rate(const StrainParams& s, double t) {
    switch (s.kind) {
        case ModelKind::O: return 0.0;
        case ModelKind::F: return s.rate;
        case ModelKind::D: return s.rate * std::exp(-s.decay * t);
    }
    return 0.0;
}

// Integral of g over [0, t]. The decaying form (rate/decay)(1 - e^{-decay t})
// switches to its series at |decay| < 1e-8 to stay smooth through decay = 0.
inline double strain_integral(const StrainParams& s, double t) {
    switch (s.kind) {
        case ModelKind::O: return 0.0;
        case ModelKind::F: return s.rate * t;
        case ModelKind::D: {
            const double bt = s.decay * t;
            if (std::abs(s.decay) < 1e-8)
                return s.rate * t * (1.0 - 0.5 * bt + bt * bt / 6.0);
            return s.rate / s.decay * -std::expm1(-bt);
        }
    }
    return 0.0;
}

// Nondimensional model parameters for one window: evaporation rate plus the
// strain law. The osmotic group rides separately (it is fixed by the scales,
// never fitted).
struct ModelParams {
    double evap = 0.0; // v: nondimensional evaporative thinning rate, >= 0 in fits
    StrainParams strain;
};

// Dimensional counterparts in reporting units. Only the fields relevant to
// the kind are meaningful (O: evap only; F: evap + strain_rate; D: all three).
struct DimensionalParams {
    double evap_um_per_min = 0.0;
    double strain_rate_per_s = 0.0;
    double strain_decay_per_s = 0.0;
};

// v = t_s * (v'/60) / h0 with v' in um/min; rates scale by t_s directly.
inline ModelParams to_nondim(ModelKind kind, const DimensionalParams& d,
                             const TrialScales& s) {
    if (!(s.h0_um > 0.0) || !(s.window_s > 0.0))
        throw std::invalid_argument("to_nondim: nonpositive scale");
    ModelParams p;
    p.evap = s.window_s * (d.evap_um_per_min / 60.0) / s.h0_um;
    p.strain.kind = kind;
    if (kind != ModelKind::O) p.strain.rate = s.window_s * d.strain_rate_per_s;
    if (kind == ModelKind::D) p.strain.decay = s.window_s * d.strain_decay_per_s;
    return p;
}

inline DimensionalParams to_dim(const ModelParams& p, const TrialScales& s) {
    if (!(s.h0_um > 0.0) || !(s.window_s > 0.0))
        throw std::invalid_argument("to_dim: nonpositive scale");
    DimensionalParams d;
    d.evap_um_per_min = p.evap * s.h0_um / s.window_s * 60.0;
    if (p.strain.kind != ModelKind::O) d.strain_rate_per_s = p.strain.rate / s.window_s;
    if (p.strain.kind == ModelKind::D) d.strain_decay_per_s = p.strain.decay / s.window_s;
    return d;
}

// State on the unit interval: thickness h and solute measure m = h*c, both
// relative to their initial values. Tracking m instead of c preserves the
// conservation structure d(hc)/dt = -g h c exactly at the equation level.
struct State {
    double h = 1.0;
    double m = 1.0;
    double conc() const { return m / h; }
};

struct StateRate {
    double dh = 0.0;
    double dm = 0.0;
};

// dh/dt = -g h + osmosis (c - 1) - v,  dm/dt = -g m.
inline StateRate rhs(const ModelParams& p, double osmosis, double t, const State& x) {
    if (!(x.h > 0.0))
        throw std::domain_error("rhs: film thickness must be positive");
    const double g = strain_rate(p.strain, t);
    StateRate r;
    r.dh = -g * x.h + osmosis * (x.m / x.h - 1.0) - p.evap;
    r.dm = -g * x.m;
    return r;
}

} // namespace tearfilm
