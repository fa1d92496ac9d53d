#include "tearfilm/solve.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/numeric/odeint.hpp>

namespace tearfilm {

namespace {

using state_t = std::array<double, 2>;

// Trial steps may probe below the breakup floor before the controller rejects
// them; clamping the osmosis division keeps those evaluations finite without
// touching any state the solver actually accepts.
constexpr double kEvalFloor = 1e-9;

struct System {
    const ModelParams& p;
    double osmosis;
    void operator()(const state_t& x, state_t& dxdt, double t) const {
        const double g = strain_rate(p.strain, t);
        const double h_safe = std::max(x[0], kEvalFloor);
        dxdt[0] = -g * x[0] + osmosis * (x[1] / h_safe - 1.0) - p.evap;
        dxdt[1] = -g * x[1];
    }
};

// Tracks how long a monitored rate has stayed positive. Runs are measured
// from the first sample at which the rate is positive, so detection can lag
// the true onset by at most one sample spacing (never fires early).
struct IncreaseRun {
    double start = std::numeric_limits<double>::quiet_NaN();
    bool update(double t, double rate, double window) {
        if (rate > 0.0) {
            if (std::isnan(start)) start = t;
            return t - start >= window;
        }
        start = std::numeric_limits<double>::quiet_NaN();
        return false;
    }
};

} // namespace

Trajectory solve(const ModelParams& params, double osmosis,
                 const std::vector<double>& times, const SolveOptions& opts) {
    if (times.empty()) throw std::invalid_argument("solve: empty output grid");
    if (times.front() != 0.0) throw std::invalid_argument("solve: grid must start at 0");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("solve: grid must be strictly increasing");
    if (!(osmosis >= 0.0)) throw std::invalid_argument("solve: negative osmosis group");

    namespace ode = boost::numeric::odeint;
    const System sys{params, osmosis};
    const double t_end = times.back();

    Trajectory out;
    out.t.reserve(times.size());
    out.h.reserve(times.size());
    out.m.reserve(times.size());

    state_t x{1.0, 1.0};
    out.t.push_back(0.0);
    out.h.push_back(1.0);
    out.m.push_back(1.0);
    std::size_t next_out = 1;

    const bool monitor = opts.sustained_window > 0.0;
    IncreaseRun h_run, aux_run;
    auto h_rate = [&](double t, const State& s) {
        const double g = strain_rate(params.strain, t);
        return -g * s.h + osmosis * (s.m / std::max(s.h, kEvalFloor) - 1.0) - params.evap;
    };
    // Sample spacing for event monitoring on the dense interpolant.
    const double probe_dt =
        monitor ? opts.sustained_window / 32.0 : std::max(t_end / 256.0, 1e-4);

    auto stepper = ode::make_dense_output(opts.abs_tol, opts.rel_tol, opts.max_dt,
                                          ode::runge_kutta_dopri5<state_t>());
    stepper.initialize(x, 0.0, 1e-4);

    // Emits every requested sample in (from, upto]; returns false once the
    // grid is exhausted.
    auto emit_until = [&](double upto) {
        state_t xi;
        while (next_out < times.size() && times[next_out] <= upto + 1e-15) {
            const double ti = std::min(times[next_out], stepper.current_time());
            stepper.calc_state(ti, xi);
            out.t.push_back(times[next_out]);
            out.h.push_back(xi[0]);
            out.m.push_back(xi[1]);
            ++next_out;
        }
        return next_out < times.size();
    };

    if (monitor) {
        const State s0{1.0, 1.0};
        h_run.update(0.0, h_rate(0.0, s0), opts.sustained_window);
        if (opts.aux_rate) aux_run.update(0.0, opts.aux_rate(0.0, s0), opts.sustained_window);
    }

    double t_prev = 0.0;
    std::size_t steps = 0;
    while (t_prev < t_end && next_out < times.size()) {
        if (++steps > opts.max_steps) {
            out.termination = Termination::step_failure;
            out.end_time = t_prev;
            return out;
        }
        try {
            stepper.do_step(sys);
        } catch (const std::exception&) {
            out.termination = Termination::step_failure;
            out.end_time = t_prev;
            return out;
        }
        const double t_cur = stepper.current_time();
        const state_t& x_cur = stepper.current_state();
        if (!std::isfinite(x_cur[0]) || !std::isfinite(x_cur[1])) {
            out.termination = Termination::step_failure;
            out.end_time = t_prev;
            return out;
        }

        // Probe the dense interpolant across this step for floor crossings and
        // sustained-increase runs before emitting any samples from it.
        const double span = t_cur - t_prev;
        const int n_probe = std::max(2, static_cast<int>(std::ceil(span / probe_dt)));
        double t_good = t_prev;
        double event_t = -1.0;
        Termination event_kind = Termination::none;
        state_t xi;
        for (int k = 1; k <= n_probe && event_kind == Termination::none; ++k) {
            const double tk = (k == n_probe) ? t_cur : t_prev + span * k / n_probe;
            stepper.calc_state(tk, xi);
            if (xi[0] <= opts.thickness_floor) {
                // Bisect the crossing between the last healthy probe and tk.
                double lo = t_good, hi = tk;
                for (int it = 0; it < 60 && hi - lo > 1e-13; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    stepper.calc_state(mid, xi);
                    (xi[0] <= opts.thickness_floor ? hi : lo) = mid;
                }
                event_t = lo;
                event_kind = Termination::breakup;
                break;
            }
            t_good = tk;
            if (monitor) {
                const State sk{xi[0], xi[1]};
                if (h_run.update(tk, h_rate(tk, sk), opts.sustained_window) ||
                    (opts.aux_rate &&
                     aux_run.update(tk, opts.aux_rate(tk, sk), opts.sustained_window))) {
                    event_t = tk;
                    event_kind = Termination::sustained_increase;
                }
            }
        }

        if (event_kind != Termination::none) {
            emit_until(event_t);
            out.termination = event_kind;
            out.end_time = event_t;
            return out;
        }
        if (!emit_until(t_cur)) break;
        t_prev = t_cur;
    }

    out.end_time = times.back();
    return out;
}

} // namespace tearfilm
