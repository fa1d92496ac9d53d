#include "tearfilm/fitting.hpp"

#include <algorithm>
#include <cmath>

#include "tearfilm/fluorescence.hpp"
#include "tearfilm/optimize.hpp"

namespace tearfilm {

namespace {

struct Evaluation {
    Trajectory traj;
    std::vector<double> intensity;
    double value = 0.0;
    bool penalized = false;
};

double weighted_sse(const std::vector<double>& model_intensity, const CleanSeries& data,
                    MisfitForm form) {
    const std::size_t n = data.t.size();
    if (form == MisfitForm::mean) {
        double sum = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double r = model_intensity[k] - data.intensity[k];
            sum += r * r;
        }
        return sum / static_cast<double>(n);
    }
    double sum = 0.0, wsum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double left = k == 0 ? data.t[0] : data.t[k - 1];
        const double right = k == n - 1 ? data.t[n - 1] : data.t[k + 1];
        const double w = 0.5 * (right - left);
        const double r = model_intensity[k] - data.intensity[k];
        sum += w * r * r;
        wsum += w;
    }
    return sum / wsum;
}

Evaluation evaluate(const ModelParams& params, const CleanSeries& data,
                    const NondimGroups& groups, const IntensityModel& im,
                    const FitConfig& cfg, bool monitor) {
    SolveOptions so = cfg.solver;
    if (monitor) {
        so.sustained_window = cfg.delta_sus;
        so.aux_rate = [&](double t, const State& s) {
            return intensity_rate(im, params, groups.osmosis, t, s);
        };
    } else {
        so.sustained_window = 0.0;
        so.aux_rate = nullptr;
    }

    Evaluation ev;
    ev.traj = solve(params, groups.osmosis, data.t, so);
    if (ev.traj.termination == Termination::sustained_increase ||
        ev.traj.termination == Termination::step_failure) {
        ev.penalized = true;
        ev.value = cfg.penalty - ev.traj.end_time / data.t.back();
        return ev;
    }

    const std::size_t n = data.t.size();
    ev.intensity.resize(n);
    for (std::size_t k = 0; k < ev.traj.t.size(); ++k)
        ev.intensity[k] = intensity(im, ev.traj.h[k], ev.traj.m[k] / ev.traj.h[k]);
    if (ev.traj.t.size() < n) {
        // Breakup inside the window: the film is gone, so the model stays at
        // the terminal brightness (essentially dark) for the remaining data.
        const double floor = so.thickness_floor;
        const double m_end =
            std::exp(-strain_integral(params.strain, ev.traj.end_time));
        const double hold = intensity(im, floor, m_end / floor);
        for (std::size_t k = ev.traj.t.size(); k < n; ++k) ev.intensity[k] = hold;
    }
    ev.value = weighted_sse(ev.intensity, data, cfg.form);
    return ev;
}

void check_data(const CleanSeries& data) {
    if (data.t.size() < 2 || data.t.size() != data.intensity.size())
        throw std::invalid_argument("fit data must pair at least two samples");
}

DimensionalParams unpack(ModelKind kind, const std::vector<double>& x) {
    DimensionalParams d;
    d.evap_um_per_min = x[0];
    if (kind == ModelKind::F) d.strain_rate_per_s = x[1];
    if (kind == ModelKind::D) {
        d.strain_rate_per_s = x[1];
        d.strain_decay_per_s = x[2];
    }
    return d;
}

std::vector<double> pack(ModelKind kind, const DimensionalParams& d) {
    std::vector<double> x{d.evap_um_per_min};
    if (kind != ModelKind::O) x.push_back(d.strain_rate_per_s);
    if (kind == ModelKind::D) x.push_back(d.strain_decay_per_s);
    return x;
}

} // namespace

std::pair<std::vector<double>, std::vector<double>> box_bounds(ModelKind kind,
                                                               const BoxConstraints& box) {
    std::vector<double> lo{box.evap_min_um_per_min};
    std::vector<double> hi{box.evap_max_um_per_min};
    if (kind == ModelKind::F) {
        lo.push_back(box.strain_min_per_s);
        hi.push_back(box.strain_max_per_s);
    } else if (kind == ModelKind::D) {
        lo.push_back(box.flow_min_per_s);
        hi.push_back(box.flow_max_per_s);
        lo.push_back(box.decay_min_per_s);
        hi.push_back(box.decay_max_per_s);
    }
    return {lo, hi};
}

void validate(const FitConfig& cfg) {
    if (!(cfg.rel_tol > 0.0) || !(cfg.abs_tol > 0.0))
        throw std::invalid_argument("optimizer tolerances must be positive");
    if (!(cfg.delta_sus > 0.0) || !(cfg.delta_sus < 1.0))
        throw std::invalid_argument("sustained-increase duration must lie in (0, 1)");
    if (cfg.lhs_starts < 0) throw std::invalid_argument("negative start count");
    if (!(cfg.penalty > 0.0)) throw std::invalid_argument("penalty must be positive");
    if (cfg.retry_cap < 0) throw std::invalid_argument("negative retry cap");
    for (const auto kind : {ModelKind::O, ModelKind::F, ModelKind::D}) {
        const auto [lo, hi] = box_bounds(kind, cfg.box);
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(lo[i] < hi[i]))
                throw std::invalid_argument("box bounds must satisfy lower < upper");
    }
}

double misfit(const ModelParams& params, const CleanSeries& data,
              const NondimGroups& groups, double f0, const FitConfig& cfg) {
    validate(cfg);
    check_data(data);
    const auto im = make_intensity_model(groups.optical_depth, f0);
    return evaluate(params, data, groups, im, cfg, false).value;
}

double penalized_objective(const ModelParams& params, const CleanSeries& data,
                           const NondimGroups& groups, double f0, const FitConfig& cfg) {
    validate(cfg);
    check_data(data);
    const auto im = make_intensity_model(groups.optical_depth, f0);
    return evaluate(params, data, groups, im, cfg, true).value;
}

FitResult fit_model(const CleanSeries& data, ModelKind kind, const TrialScales& scales,
                    const FitConfig& cfg,
                    const std::optional<DimensionalParams>& inherited) {
    validate(cfg);
    check_data(data);
    const auto groups = derive_groups(scales);
    const auto im = make_intensity_model(groups.optical_depth, scales.f0);
    const auto [lo, hi] = box_bounds(kind, cfg.box);
    const BoxTransform box(lo, hi);
    const std::size_t dims = lo.size();

    const auto objective_x = [&](const std::vector<double>& x) {
        const auto p = to_nondim(kind, unpack(kind, x), scales);
        return evaluate(p, data, groups, im, cfg, true).value;
    };
    const auto objective_z = [&](const std::vector<double>& z) {
        return objective_x(box.to_box(z));
    };

    std::vector<std::vector<double>> starts;
    std::vector<double> center(dims);
    for (std::size_t d = 0; d < dims; ++d) center[d] = 0.5 * (lo[d] + hi[d]);
    starts.push_back(center);
    SplitMix64 rng{cfg.seed +
                   0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(kind) + 1)};
    for (const auto& u : latin_hypercube(static_cast<std::size_t>(cfg.lhs_starts), dims, rng)) {
        std::vector<double> x(dims);
        for (std::size_t d = 0; d < dims; ++d) x[d] = lo[d] + u[d] * (hi[d] - lo[d]);
        starts.push_back(std::move(x));
    }
    if (inherited) starts.push_back(pack(kind, *inherited));

    OptimizeOptions oo;
    oo.rel_tol = cfg.rel_tol;
    oo.abs_tol = cfg.abs_tol;

    bool have = false, converged = false;
    double best_value = 0.0;
    std::vector<double> best_x, winner;
    for (const auto& s : starts) {
        const auto r = nelder_mead(objective_z, box.to_unbounded(s), oo);
        if (!have || r.value < best_value) {
            have = true;
            best_value = r.value;
            best_x = box.to_box(r.x);
            converged = r.converged;
            winner = s;
        }
    }

    // The bijection cannot land exactly on a bound, so also evaluate the
    // inherited optimum itself; the richer model then starts no worse than
    // the simpler one ended.
    if (inherited) {
        const auto x_emb = pack(kind, *inherited);
        const double v_emb = objective_x(x_emb);
        if (v_emb < best_value) {
            best_value = v_emb;
            best_x = x_emb;
            converged = true;
            winner = x_emb;
        }
    }

    bool cross_ok = true;
    if (cfg.cross_check) {
        OptimizeOptions co = oo;
        co.initial_step = 0.1;
        const auto cs = compass_search(objective_z, box.to_unbounded(best_x), co);
        // Same shape as the optimizer's own tolerance: near-zero residuals
        // agree absolutely, large ones relatively.
        cross_ok = std::abs(cs.value - best_value) <=
                   cfg.abs_tol + cfg.cross_check_rel *
                                     std::max(std::abs(best_value),
                                              std::abs(cs.value));
        if (cs.value < best_value) {
            best_value = cs.value;
            best_x = box.to_box(cs.x);
        }
    }

    FitResult res;
    res.kind = kind;
    res.dim = unpack(kind, best_x);
    res.nondim = to_nondim(kind, res.dim, scales);
    res.converged = converged;
    res.cross_check_ok = cross_ok;
    res.winning_start = winner;
    res.at_lower.resize(dims);
    res.at_upper.resize(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        const double span = hi[d] - lo[d];
        res.at_lower[d] = best_x[d] - lo[d] <= 1e-6 * span;
        res.at_upper[d] = hi[d] - best_x[d] <= 1e-6 * span;
    }

    auto ev = evaluate(res.nondim, data, groups, im, cfg, true);
    res.residual = ev.value;
    res.penalized = ev.penalized;
    res.trajectory = std::move(ev.traj);
    res.intensity = std::move(ev.intensity);

    if (res.penalized && res.residual >= cfg.penalty - 1.5)
        throw FitFailed("every start ended in a penalty", res);
    return res;
}

HierarchyResult fit_hierarchy(const CleanSeries& data, const TrialScales& scales,
                              const FitConfig& cfg) {
    validate(cfg);
    HierarchyResult hr;

    const auto run = [&](ModelKind kind, const std::optional<DimensionalParams>& inh,
                         std::uint64_t salt) {
        FitConfig local = cfg;
        local.seed = cfg.seed + salt;
        try {
            return fit_model(data, kind, scales, local, inh);
        } catch (const FitFailed& e) {
            hr.diagnostics.push_back(std::string(to_string(kind)) +
                                     ": every start ended in a penalty");
            return e.best;
        }
    };

    hr.o = run(ModelKind::O, std::nullopt, 0);
    hr.f = run(ModelKind::F, hr.o.dim, 0);
    hr.d = run(ModelKind::D, hr.f.dim, 0);

    for (int retry = 1; retry <= cfg.retry_cap; ++retry) {
        const bool f_bad = hr.f.residual > hr.o.residual + cfg.ordering_slack;
        const bool d_bad = hr.d.residual > hr.f.residual + cfg.ordering_slack;
        if (!f_bad && !d_bad) break;
        if (f_bad) {
            hr.diagnostics.push_back("retrying F: residual above O");
            hr.f = run(ModelKind::F, hr.o.dim, static_cast<std::uint64_t>(retry));
        } else {
            hr.diagnostics.push_back("retrying D: residual above F");
            hr.d = run(ModelKind::D, hr.f.dim, static_cast<std::uint64_t>(retry));
        }
    }
    hr.ordering_verified = hr.f.residual <= hr.o.residual + cfg.ordering_slack &&
                           hr.d.residual <= hr.f.residual + cfg.ordering_slack;
    return hr;
}

} // namespace tearfilm
