#include "tearfilm/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

namespace tearfilm {

namespace {

// Hampel's consistency factor: MAD -> sigma for Gaussian noise.
constexpr double kMadToSigma = 1.4826;

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::size_t edge_count(std::size_t n, double fraction) {
    const auto k = static_cast<std::size_t>(std::ceil(n * fraction));
    return std::max<std::size_t>(1, std::min(k, n));
}

// The fixed reason vocabulary, in report order.
const char* const kReasonOrder[] = {"h0_out_of_range", "f0_too_high", "brightening",
                                    "insufficient_drop", "too_short"};

std::size_t reason_rank(const std::string& r) {
    for (std::size_t i = 0; i < std::size(kReasonOrder); ++i)
        if (r == kReasonOrder[i]) return i;
    return std::size(kReasonOrder);
}

} // namespace

void validate(const PreprocessConfig& cfg) {
    if (cfg.despike_window < 3 || cfg.despike_window % 2 == 0)
        throw std::invalid_argument("despike window must be odd and at least 3");
    if (cfg.smooth_width < 1 || cfg.smooth_width % 2 == 0)
        throw std::invalid_argument("smoothing width must be odd and at least 1");
    if (!(cfg.h0_min_um > 0.0) || !(cfg.h0_max_um > cfg.h0_min_um))
        throw std::invalid_argument("thickness bounds must satisfy 0 < min < max");
    if (!(cfg.f0_max_percent > 0.0))
        throw std::invalid_argument("concentration cap must be positive");
    if (!(cfg.edge_fraction > 0.0) || cfg.edge_fraction > 0.5)
        throw std::invalid_argument("edge fraction must lie in (0, 0.5]");
    if (!(cfg.min_window_s > 0.0))
        throw std::invalid_argument("minimum window must be positive");
    if (!(cfg.brighten_ratio > 0.0) || !(cfg.drop_ratio > 0.0) || cfg.drop_ratio >= 1.0)
        throw std::invalid_argument("screening ratios out of range");
    if (cfg.min_samples < 2) throw std::invalid_argument("min_samples must be at least 2");
}

void ScreeningReport::reject(std::string reason) {
    accepted = false;
    reasons.push_back(std::move(reason));
}

ScreeningReport merge(const std::vector<ScreeningReport>& parts) {
    std::set<std::string> seen;
    for (const auto& p : parts) seen.insert(p.reasons.begin(), p.reasons.end());
    ScreeningReport out;
    out.reasons.assign(seen.begin(), seen.end());
    std::sort(out.reasons.begin(), out.reasons.end(),
              [](const std::string& a, const std::string& b) {
                  return reason_rank(a) < reason_rank(b);
              });
    out.accepted = out.reasons.empty();
    return out;
}

ScreeningReport screen_scales(const SeriesMetadata& meta, const PreprocessConfig& cfg) {
    if (!meta.h0_um) throw std::invalid_argument("missing metadata field: h0_um");
    if (!meta.f0_percent) throw std::invalid_argument("missing metadata field: f0_percent");
    if (!(*meta.f0_percent > 0.0))
        throw std::invalid_argument("f0_percent must be positive");
    ScreeningReport r;
    if (*meta.h0_um < cfg.h0_min_um || *meta.h0_um > cfg.h0_max_um)
        r.reject("h0_out_of_range");
    if (*meta.f0_percent > cfg.f0_max_percent) r.reject("f0_too_high");
    return r;
}

ScreeningReport screen_brightening(const std::vector<double>& values,
                                   const PreprocessConfig& cfg) {
    ScreeningReport r;
    if (values.size() < cfg.min_samples) {
        r.reject("too_short");
        return r;
    }
    const std::size_t k = edge_count(values.size(), cfg.edge_fraction);
    const double head = median({values.begin(), values.begin() + k});
    const double tail = median({values.end() - k, values.end()});
    if (tail >= cfg.brighten_ratio * head) r.reject("brightening");
    return r;
}

ScreeningReport screen_drop(const std::vector<double>& values,
                            const PreprocessConfig& cfg) {
    ScreeningReport r;
    if (values.size() < cfg.min_samples) {
        r.reject("too_short");
        return r;
    }
    const std::size_t k = edge_count(values.size(), cfg.edge_fraction);
    const double head = median({values.begin(), values.begin() + k});
    const double tail = median({values.end() - k, values.end()});
    if (!(tail <= cfg.drop_ratio * head)) r.reject("insufficient_drop");
    return r;
}

ScreeningReport screen(const RawSeries& raw, const SeriesMetadata& meta,
                       const PreprocessConfig& cfg) {
    return merge({screen_scales(meta, cfg), screen_brightening(raw.value, cfg),
                  screen_drop(raw.value, cfg)});
}

std::vector<double> despike(const std::vector<double>& values,
                            const PreprocessConfig& cfg) {
    validate(cfg);
    std::vector<double> out = values;
    const std::size_t n = out.size();
    if (n < static_cast<std::size_t>(cfg.despike_window)) return out;
    const std::size_t r = cfg.despike_window / 2;

    // Batch passes until a fixed point: every sample is judged against the
    // same snapshot, then replacements are applied together.
    for (int pass = 0; pass < 32; ++pass) {
        std::vector<double> next = out;
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t lo = i >= r ? i - r : 0;
            const std::size_t hi = std::min(n - 1, i + r);
            std::vector<double> win(out.begin() + lo, out.begin() + hi + 1);
            const double med = median(win);
            for (double& w : win) w = std::abs(w - med);
            const double mad = median(win);
            if (std::abs(out[i] - med) > cfg.despike_nsigma * kMadToSigma * mad) {
                next[i] = med;
                changed = true;
            }
        }
        out.swap(next);
        if (!changed) break;
    }
    return out;
}

std::vector<double> smooth(const std::vector<double>& values,
                           const PreprocessConfig& cfg) {
    validate(cfg);
    const std::size_t n = values.size();
    std::vector<double> out(n);
    const std::size_t r = cfg.smooth_width / 2;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t radius = std::min({r, i, n - 1 - i});
        double sum = 0.0;
        for (std::size_t k = i - radius; k <= i + radius; ++k) sum += values[k];
        out[i] = sum / static_cast<double>(2 * radius + 1);
    }
    return out;
}

namespace {

struct Candidate {
    bool have = false;
    std::size_t i = 0, j = 0;
    double rate = 0.0;
};

// A window is trim-stable when its smoothed series opens on a strict
// decrease and closes steeper than the plateau threshold.
bool trim_stable(const std::vector<double>& t_s, const std::vector<double>& s,
                 std::size_t i, std::size_t j, const PreprocessConfig& cfg) {
    if (s[i + 1] >= s[i]) return false;
    const double eps = cfg.plateau_drop_frac_per_s * (s[i] - s[j]);
    const double end_slope = (s[j] - s[j - 1]) / (t_s[j] - t_s[j - 1]);
    return end_slope < -eps;
}

// Steepest average decrease of the despiked series over spans of at least
// min_window_s; ties go to the longer window, then the earlier start.
Candidate steepest(const std::vector<double>& t_s, const std::vector<double>& d,
                   const std::vector<double>& s, std::size_t lo, std::size_t hi,
                   bool stable_only, const PreprocessConfig& cfg) {
    Candidate best;
    for (std::size_t i = lo; i < hi; ++i) {
        for (std::size_t j = i + 1; j <= hi; ++j) {
            const double dur = t_s[j] - t_s[i];
            if (dur < cfg.min_window_s) continue;
            const double rate = (d[i] - d[j]) / dur;
            if (!(rate > 0.0)) continue;
            if (stable_only && !trim_stable(t_s, s, i, j, cfg)) continue;
            if (!best.have) {
                best = {true, i, j, rate};
                continue;
            }
            const double tol = cfg.rate_tie_rel * std::max(rate, best.rate);
            if (rate > best.rate + tol) {
                best = {true, i, j, rate};
            } else if (rate >= best.rate - tol) {
                const double bdur = t_s[best.j] - t_s[best.i];
                const double dtol = 1e-12 * std::max(dur, bdur);
                if (dur > bdur + dtol ||
                    (std::abs(dur - bdur) <= dtol && i < best.i))
                    best = {true, i, j, rate};
            }
        }
    }
    return best;
}

} // namespace

Window select_window(const std::vector<double>& t_s,
                     const std::vector<double>& despiked,
                     const std::vector<double>& smoothed,
                     const PreprocessConfig& cfg) {
    validate(cfg);
    const std::size_t n = t_s.size();
    if (despiked.size() != n || smoothed.size() != n)
        throw std::invalid_argument("series lengths disagree");
    if (n < 2 || t_s.back() - t_s.front() < cfg.min_window_s)
        throw NoWindowError("series spans less than the minimum window");

    std::size_t lo = 0, hi = n - 1;
    // The range only ever shrinks, so this settles in at most n rounds.
    for (std::size_t iter = 0; iter <= n; ++iter) {
        const auto cand = steepest(t_s, despiked, smoothed, lo, hi, false, cfg);
        if (!cand.have)
            throw NoWindowError("no sustained decrease lasting the minimum window");

        // Trim on the smoothed series: skip a non-decreasing prefix, then
        // drop trailing samples whose slope is flatter than the plateau
        // threshold (1% of the window's drop per second by default).
        std::size_t wi = cand.i, wj = cand.j;
        while (wi < wj && smoothed[wi + 1] >= smoothed[wi]) ++wi;
        const double eps = cfg.plateau_drop_frac_per_s * (smoothed[wi] - smoothed[wj]);
        while (wj > wi) {
            const double slope =
                (smoothed[wj] - smoothed[wj - 1]) / (t_s[wj] - t_s[wj - 1]);
            if (slope >= -eps)
                --wj;
            else
                break;
        }

        if (wi == cand.i && wj == cand.j) {
            Window w;
            w.first = cand.i;
            w.last = cand.j;
            w.start_s = t_s[cand.i];
            w.end_s = t_s[cand.j];
            w.rate = cand.rate;
            return w;
        }
        if (wj > wi && t_s[wj] - t_s[wi] >= cfg.min_window_s) {
            lo = wi;  // reselect within the trimmed range
            hi = wj;
            continue;
        }
        // Trimming ate the best candidate; settle for the steepest window
        // that is already stable under trimming.
        const auto fallback = steepest(t_s, despiked, smoothed, lo, hi, true, cfg);
        if (!fallback.have)
            throw NoWindowError("no sustained decrease lasting the minimum window");
        Window w;
        w.first = fallback.i;
        w.last = fallback.j;
        w.start_s = t_s[fallback.i];
        w.end_s = t_s[fallback.j];
        w.rate = fallback.rate;
        return w;
    }
    throw NoWindowError("window selection did not stabilize");
}

CleanSeries normalize(const std::vector<double>& t_s,
                      const std::vector<double>& values, const Window& win) {
    if (win.last <= win.first || win.last >= t_s.size() || values.size() != t_s.size())
        throw std::invalid_argument("window indices out of range");
    const double base = values[win.first];
    if (!(base > 0.0))
        throw std::domain_error("window starts at a nonpositive intensity");
    const double span = t_s[win.last] - t_s[win.first];
    CleanSeries c;
    c.window_start_s = t_s[win.first];
    c.window_end_s = t_s[win.last];
    c.window_s = span;
    const std::size_t m = win.last - win.first + 1;
    c.t.resize(m);
    c.intensity.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        c.t[k] = (t_s[win.first + k] - t_s[win.first]) / span;
        c.intensity[k] = values[win.first + k] / base;
    }
    return c;
}

PreprocessResult preprocess(const RawSeries& raw, const SeriesMetadata& meta,
                            const PreprocessConfig& cfg) {
    validate(cfg);
    const std::size_t n = raw.t_s.size();
    if (raw.value.size() != n) throw std::invalid_argument("times and values differ in length");
    if (n < 2) throw std::invalid_argument("series needs at least two samples");
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(raw.t_s[i]) || !std::isfinite(raw.value[i]))
            throw std::invalid_argument("series contains a non-finite sample");
        if (i > 0 && !(raw.t_s[i] > raw.t_s[i - 1]))
            throw std::invalid_argument("times must be strictly increasing");
        if (raw.value[i] < 0.0) throw std::invalid_argument("negative intensity sample");
        peak = std::max(peak, raw.value[i]);
    }
    if (!(peak > 0.0)) throw std::invalid_argument("series is identically zero");

    // Divide by the peak up front so every later stage sees the same numbers
    // no matter how the camera scaled its counts.
    std::vector<double> work(n);
    for (std::size_t i = 0; i < n; ++i) work[i] = raw.value[i] / peak;

    PreprocessResult res;
    res.screening = merge({screen_scales(meta, cfg), screen_brightening(work, cfg),
                           screen_drop(work, cfg)});
    if (!res.screening.accepted && !meta.force_include) return res;
    res.forced = !res.screening.accepted;

    res.despiked = despike(work, cfg);
    res.smoothed = smooth(res.despiked, cfg);
    try {
        res.window = select_window(raw.t_s, res.despiked, res.smoothed, cfg);
    } catch (const NoWindowError& e) {
        res.window_error = e.what();
        return res;
    }
    // Fit the despiked data, not the smoothed curve: smoothing guides window
    // choice but would bias the model comparison on curved stretches.
    res.clean = normalize(raw.t_s, res.despiked, *res.window);
    return res;
}

} // namespace tearfilm
