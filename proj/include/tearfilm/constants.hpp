#pragma once

#include <stdexcept>

namespace tearfilm {

// Material and optical constants of the aqueous tear film and of sodium
// fluorescein. Units are spelled out per field; these are the values used
// throughout unless a caller overrides them.
struct PhysicalConstants {
    double permeability_um_per_s = 12.0;    // corneal osmotic permeability P_o
    double water_molar_vol_m3_per_mol = 1.8e-5;
    double isotonic_mosm = 302.0;           // isotonic osmolarity, mOsM == mol/m^3
    double extinction_per_m_molar = 1.75e7; // Naperian extinction of fluorescein
    double critical_conc_percent = 0.2;     // critical fluorescein conc, % by mass
    // The same concentration in mol/L: 0.2% by mass of the disodium salt
    // (376.27 g/mol) is 2 g/L, i.e. ~0.0053 M. Kept unrounded so the optical
    // depth comes out right.
    double critical_conc_molar = 2.0 / 376.27;

    // Bulk film properties. Not used by the thinning models (extensional flow
    // enters only through the strain rate), kept for reporting and sanity
    // screens.
    double viscosity_pa_s = 1.3e-3;
    double surface_tension_n_per_m = 0.045;
    double density_kg_per_m3 = 1.0e3;
    double thinning_rate_min_um_per_min = -3.0;
    double thinning_rate_max_um_per_min = 25.0;
};

// Per-instance scales: initial film thickness, duration of the fitted window,
// and the initial fluorescein concentration expressed relative to the
// critical concentration. Everything nondimensional hangs off these.
struct TrialScales {
    double h0_um = 3.0;        // initial thickness
    double window_s = 3.0;     // fitted window duration t_s
    double f0 = 1.0;           // initial fluorescein conc / critical conc
};

// Dimensionless groups controlling osmosis and fluorescence for one instance.
struct NondimGroups {
    double osmosis = 0.0;      // P_c: osmotic supply rate on the window scale
    double optical_depth = 0.0;// phi: extinction * critical conc * h0
};

inline TrialScales make_scales(double h0_um, double window_s, double f0_percent,
                               const PhysicalConstants& pc = PhysicalConstants{}) {
    if (!(h0_um > 0.0) || !(window_s > 0.0) || !(f0_percent > 0.0))
        throw std::invalid_argument("make_scales: h0, window duration and f0 must be positive");
    return TrialScales{h0_um, window_s, f0_percent / pc.critical_conc_percent};
}

// osmosis = P_o V_w c0 t_s / h0 (P_o in um/s and h0 in um: the m/um factors cancel)
// optical_depth = extinction * critical molar conc * h0 (h0 converted to m)
inline NondimGroups derive_groups(const TrialScales& s,
                                  const PhysicalConstants& pc = PhysicalConstants{}) {
    if (!(s.h0_um > 0.0) || !(s.window_s > 0.0))
        throw std::invalid_argument("derive_groups: nonpositive scale");
    NondimGroups g;
    g.osmosis = pc.permeability_um_per_s * pc.water_molar_vol_m3_per_mol *
                pc.isotonic_mosm * s.window_s / s.h0_um;
    g.optical_depth = pc.extinction_per_m_molar * pc.critical_conc_molar * s.h0_um * 1e-6;
    return g;
}

} // namespace tearfilm
