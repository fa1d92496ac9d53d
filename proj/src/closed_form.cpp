#include "tearfilm/closed_form.hpp"

#include <cmath>
#include <stdexcept>

namespace tearfilm {

namespace {

double simpson(double a, double fa, double b, double fb, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive(const std::function<double(double)>& f, double a, double fa,
                double b, double fb, double fm, double whole, double tol,
                int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, fa, m, fm, flm);
    const double right = simpson(m, fm, b, fb, frm);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1) +
           adaptive(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1);
}

} // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = simpson(a, fa, b, fb, fm);
    return adaptive(f, a, fa, b, fb, fm, whole, tol, 48);
}

State closed_form_state(const ModelParams& params, double osmosis, double t) {
    if (osmosis != 0.0)
        throw std::domain_error("closed_form_state: only the zero-osmosis case is closed-form");
    if (t < 0.0) throw std::domain_error("closed_form_state: negative time");
    const auto& strain = params.strain;
    const double m = std::exp(-strain_integral(strain, t));
    const double depletion =
        params.evap == 0.0
            ? 0.0
            : params.evap * integrate([&](double s) { return std::exp(strain_integral(strain, s)); },
                                      0.0, t);
    const double h = m * (1.0 - depletion);
    if (!(h > 0.0))
        throw std::domain_error("closed_form_state: film vanished before requested time");
    return State{h, m};
}

double osmolarity_equilibrium(double evap, double osmosis) {
    if (!(osmosis > 0.0))
        throw std::domain_error("osmolarity_equilibrium: needs positive osmosis group");
    if (evap < 0.0)
        throw std::domain_error("osmolarity_equilibrium: negative evaporation");
    return 1.0 + evap / osmosis;
}

} // namespace tearfilm
