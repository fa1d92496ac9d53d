#include "tearfilm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tearfilm/fluorescence.hpp"
#include "tearfilm/optimize.hpp"

namespace tearfilm {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Box-Muller on the splittable generator: reproducible across toolchains,
// unlike std::normal_distribution.
double gaussian(SplitMix64& rng) {
    const double u1 = (static_cast<double>(rng.next() >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = (static_cast<double>(rng.next() >> 11) + 0.5) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("synth spec: ") + what);
}

double rel_err(double fitted, double truth) {
    const double d = std::abs(fitted - truth);
    return std::abs(truth) > 0.0 ? d / std::abs(truth) : d;
}

} // namespace

void validate(const SynthSpec& spec, const BoxConstraints& box) {
    require(spec.h0_um > 0.0, "h0 must be positive");
    require(spec.window_s > 0.0, "window must be positive");
    require(spec.f0_percent > 0.0, "f0 must be positive");
    require(spec.sample_hz > 0.0, "sampling rate must be positive");
    require(spec.noise_sigma >= 0.0, "noise sigma must be nonnegative");
    require(spec.raw_scale > 0.0, "raw scale must be positive");
    require(spec.quantize_step >= 0.0, "quantize step must be nonnegative");

    const auto& d = spec.truth;
    require(d.evap_um_per_min >= box.evap_min_um_per_min &&
                d.evap_um_per_min <= box.evap_max_um_per_min,
            "evaporation rate outside the box");
    if (spec.kind == ModelKind::F)
        require(d.strain_rate_per_s >= box.strain_min_per_s &&
                    d.strain_rate_per_s <= box.strain_max_per_s,
                "strain rate outside the box");
    if (spec.kind == ModelKind::D) {
        require(d.strain_rate_per_s >= box.flow_min_per_s &&
                    d.strain_rate_per_s <= box.flow_max_per_s,
                "initial flow rate outside the box");
        require(d.strain_decay_per_s >= box.decay_min_per_s &&
                    d.strain_decay_per_s <= box.decay_max_per_s,
                "flow decay outside the box");
    }
}

SynthResult generate(const SynthSpec& spec, const BoxConstraints& box) {
    validate(spec, box);
    const auto scales = make_scales(spec.h0_um, spec.window_s, spec.f0_percent);
    const auto groups = derive_groups(scales);
    const auto im = make_intensity_model(groups.optical_depth, scales.f0);
    const auto params = to_nondim(spec.kind, spec.truth, scales);

    const auto last = static_cast<std::size_t>(
        std::floor(spec.window_s * spec.sample_hz + 1e-9));
    std::vector<double> tau(last + 1);
    for (std::size_t k = 0; k <= last; ++k)
        tau[k] = std::min(1.0, k / spec.sample_hz / spec.window_s);

    const auto traj = solve(params, groups.osmosis, tau);
    const auto model = intensity_series(im, traj);

    SynthResult out;
    out.termination = traj.termination;
    SplitMix64 rng{spec.seed};
    const double sigma = spec.noise_sigma * spec.raw_scale;
    out.series.t_s.resize(traj.t.size());
    out.series.value.resize(traj.t.size());
    for (std::size_t k = 0; k < traj.t.size(); ++k) {
        out.series.t_s[k] = traj.t[k] * spec.window_s;
        double v = spec.raw_scale * model[k];
        if (sigma > 0.0) v += sigma * gaussian(rng);
        v = std::max(0.0, v);
        if (spec.quantize_step > 0.0)
            v = std::round(v / spec.quantize_step) * spec.quantize_step;
        out.series.value[k] = v;
    }

    out.meta.subject_id = spec.subject_id;
    out.meta.trial_id = spec.trial_id;
    out.meta.roi_id = spec.roi_id;
    out.meta.h0_um = spec.h0_um;
    out.meta.f0_percent = spec.f0_percent;
    out.meta.force_include = spec.force_include;
    return out;
}

RecoveryReport recovery_suite(const std::vector<SynthSpec>& specs,
                              const FitConfig& fit_cfg,
                              const PreprocessConfig& pre_cfg,
                              const MechanismThresholds& thr) {
    RecoveryReport report;
    report.cases.reserve(specs.size());
    for (const auto& spec : specs) {
        RecoveryCase rc;
        rc.spec = spec;
        rc.planted = classify(spec.truth.evap_um_per_min,
                              spec.kind == ModelKind::O
                                  ? 0.0
                                  : spec.truth.strain_rate_per_s,
                              thr);
        try {
            const auto synth = generate(spec);
            const auto pre = preprocess(synth.series, synth.meta, pre_cfg);
            if (!pre.clean) {
                rc.screened_out = !pre.screening.accepted;
                rc.fit_error = pre.screening.accepted;
                rc.error = rc.screened_out
                               ? "screened out"
                               : pre.window_error.value_or("no window");
                report.cases.push_back(rc);
                continue;
            }
            const auto scales = make_scales(spec.h0_um, pre.clean->window_s,
                                            spec.f0_percent);
            const auto hr = fit_hierarchy(*pre.clean, scales, fit_cfg);
            rc.ordering_verified = hr.ordering_verified;
            rc.residual = hr.d.residual;
            rc.evap_err_rel =
                rel_err(hr.d.dim.evap_um_per_min, spec.truth.evap_um_per_min);
            rc.strain_rate_err_rel =
                rel_err(hr.d.dim.strain_rate_per_s, spec.truth.strain_rate_per_s);
            rc.strain_decay_err_rel = rel_err(hr.d.dim.strain_decay_per_s,
                                              spec.truth.strain_decay_per_s);
            rc.classified = classify(hr.d.dim.evap_um_per_min,
                                     hr.d.dim.strain_rate_per_s, thr);
            rc.classification_match = rc.classified == rc.planted;
            ++report.fitted;
            if (rc.classification_match) ++report.matched;
        } catch (const std::exception& e) {
            rc.fit_error = true;
            rc.error = e.what();
        }
        report.cases.push_back(rc);
    }
    return report;
}

namespace {

double lerp(double lo, double hi, double u) { return lo + (hi - lo) * u; }

} // namespace

std::vector<SynthSpec> planted_population(int per_quadrant, std::uint64_t seed) {
    if (per_quadrant <= 0)
        throw std::invalid_argument("planted_population: per_quadrant must be positive");
    SplitMix64 rng{seed};
    std::vector<SynthSpec> specs;
    specs.reserve(static_cast<std::size_t>(per_quadrant) * 4);
    const Mechanism quads[] = {Mechanism::evap, Mechanism::flow,
                               Mechanism::mixed, Mechanism::gtf};
    int index = 0;
    for (const auto quad : quads) {
        for (int i = 0; i < per_quadrant; ++i, ++index) {
            SynthSpec s;
            s.kind = ModelKind::D;
            s.h0_um = lerp(2.5, 4.0, rng.uniform01());
            s.f0_percent = lerp(0.18, 0.3, rng.uniform01());
            switch (quad) {
                case Mechanism::evap: {
                    s.truth.evap_um_per_min = lerp(8.0, 25.0, rng.uniform01());
                    s.truth.strain_rate_per_s = lerp(-0.02, 0.02, rng.uniform01());
                    s.truth.strain_decay_per_s = lerp(0.2, 0.8, rng.uniform01());
                    // Half the film over the window: t_s v'/60 = h0/2.
                    s.window_s = 30.0 * s.h0_um / s.truth.evap_um_per_min;
                    break;
                }
                case Mechanism::mixed: {
                    s.truth.evap_um_per_min = lerp(6.0, 18.0, rng.uniform01());
                    s.truth.strain_rate_per_s = lerp(0.05, 0.12, rng.uniform01());
                    s.truth.strain_decay_per_s = lerp(0.4, 1.0, rng.uniform01());
                    s.window_s = 21.0 * s.h0_um / s.truth.evap_um_per_min;
                    break;
                }
                case Mechanism::flow: {
                    s.truth.evap_um_per_min = lerp(0.2, 1.2, rng.uniform01());
                    s.truth.strain_decay_per_s = lerp(0.2, 0.5, rng.uniform01());
                    s.window_s = lerp(8.0, 14.0, rng.uniform01());
                    // Choose the initial rate from a target flow integral so
                    // the film thins enough to pass the drop screen.
                    const double integral = lerp(0.45, 0.7, rng.uniform01());
                    s.truth.strain_rate_per_s =
                        integral * s.truth.strain_decay_per_s /
                        -std::expm1(-s.truth.strain_decay_per_s * s.window_s);
                    break;
                }
                case Mechanism::gtf: {
                    s.truth.evap_um_per_min = lerp(1.0, 1.35, rng.uniform01());
                    s.truth.strain_decay_per_s = lerp(0.03, 0.06, rng.uniform01());
                    s.h0_um = lerp(2.8, 3.5, rng.uniform01());
                    s.window_s = lerp(55.0, 80.0, rng.uniform01());
                    const double integral = lerp(0.25, 0.4, rng.uniform01());
                    s.truth.strain_rate_per_s =
                        integral * s.truth.strain_decay_per_s /
                        -std::expm1(-s.truth.strain_decay_per_s * s.window_s);
                    break;
                }
            }
            s.sample_hz = std::max(2.0, std::min(20.0, 240.0 / s.window_s));
            s.seed = rng.next();
            s.subject_id = index % 2 == 0 ? "s01" : "s02";
            s.trial_id = "t" + std::to_string(index);
            s.roi_id = to_string(quad);
            specs.push_back(s);
        }
    }
    return specs;
}

} // namespace tearfilm
