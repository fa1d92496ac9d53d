#include "tearfilm/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace tearfilm {

namespace {

// Treat non-finite objective values as infinitely bad so the simplex backs
// away from them instead of propagating NaN through comparisons.
double guarded(const Objective& f, const std::vector<double>& x, int& evals) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

} // namespace

BoxTransform::BoxTransform(std::vector<double> lower, std::vector<double> upper)
    : lo_(std::move(lower)), hi_(std::move(upper)) {
    if (lo_.size() != hi_.size() || lo_.empty())
        throw std::invalid_argument("box bounds must be nonempty and equal length");
    for (std::size_t i = 0; i < lo_.size(); ++i)
        if (!(lo_[i] < hi_[i]))
            throw std::invalid_argument("box bounds must satisfy lower < upper");
}

std::vector<double> BoxTransform::to_unbounded(const std::vector<double>& x) const {
    if (x.size() != lo_.size()) throw std::invalid_argument("dimension mismatch");
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double frac = (x[i] - lo_[i]) / (hi_[i] - lo_[i]);
        // Boundary starts are legal inputs; nudge them just inside.
        frac = std::clamp(frac, 1e-12, 1.0 - 1e-12);
        z[i] = std::log(frac / (1.0 - frac));
    }
    return z;
}

std::vector<double> BoxTransform::to_box(const std::vector<double>& z) const {
    if (z.size() != lo_.size()) throw std::invalid_argument("dimension mismatch");
    std::vector<double> x(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-z[i]));
        x[i] = lo_[i] + (hi_[i] - lo_[i]) * s;
    }
    return x;
}

OptimizeResult nelder_mead(const Objective& f, const std::vector<double>& start,
                           const OptimizeOptions& opts) {
    const std::size_t n = start.size();
    if (n == 0) throw std::invalid_argument("empty start point");

    int evals = 0;
    std::vector<std::vector<double>> pt(n + 1, start);
    std::vector<double> val(n + 1);
    for (std::size_t i = 1; i <= n; ++i) pt[i][i - 1] += opts.initial_step;
    for (std::size_t i = 0; i <= n; ++i) val[i] = guarded(f, pt[i], evals);

    std::vector<std::size_t> order(n + 1);
    OptimizeResult res;
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
        const std::size_t best = order[0], worst = order[n];
        const std::size_t second_worst = order[n - 1];

        // Stop only when both the values and the vertices have collapsed,
        // so parameter accuracy tracks the coordinate tolerance instead of
        // the square root of the objective tolerance.
        const bool values_tight = std::abs(val[worst] - val[best]) <=
                                  opts.abs_tol + opts.rel_tol * std::abs(val[best]);
        double diameter = 0.0, scale = 0.0;
        for (std::size_t d = 0; d < n; ++d) {
            scale = std::max(scale, std::abs(pt[best][d]));
            for (std::size_t i = 0; i <= n; ++i)
                diameter = std::max(diameter, std::abs(pt[i][d] - pt[best][d]));
        }
        if (values_tight && diameter <= opts.rel_tol * (1.0 + scale)) {
            res.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t d = 0; d < n; ++d) centroid[d] += pt[i][d];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        auto blend = [&](double coef) {
            std::vector<double> x(n);
            for (std::size_t d = 0; d < n; ++d)
                x[d] = centroid[d] + coef * (pt[worst][d] - centroid[d]);
            return x;
        };

        const auto reflected = blend(-1.0);
        const double fr = guarded(f, reflected, evals);
        if (fr < val[order[0]]) {
            const auto expanded = blend(-2.0);
            const double fe = guarded(f, expanded, evals);
            if (fe < fr) {
                pt[worst] = expanded;
                val[worst] = fe;
            } else {
                pt[worst] = reflected;
                val[worst] = fr;
            }
            continue;
        }
        if (fr < val[second_worst]) {
            pt[worst] = reflected;
            val[worst] = fr;
            continue;
        }
        const bool outside = fr < val[worst];
        const auto contracted = blend(outside ? -0.5 : 0.5);
        const double fc = guarded(f, contracted, evals);
        if (fc < std::min(fr, val[worst])) {
            pt[worst] = contracted;
            val[worst] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (std::size_t d = 0; d < n; ++d)
                pt[i][d] = pt[best][d] + 0.5 * (pt[i][d] - pt[best][d]);
            val[i] = guarded(f, pt[i], evals);
        }
    }

    const std::size_t final_best = static_cast<std::size_t>(
        std::min_element(val.begin(), val.end()) - val.begin());
    res.x = pt[final_best];
    res.value = val[final_best];
    res.evaluations = evals;
    return res;
}

OptimizeResult compass_search(const Objective& f, const std::vector<double>& start,
                              const OptimizeOptions& opts) {
    const std::size_t n = start.size();
    if (n == 0) throw std::invalid_argument("empty start point");

    int evals = 0;
    std::vector<double> x = start;
    double fx = guarded(f, x, evals);
    double step = opts.initial_step;
    const double step_floor = 1e-9;

    OptimizeResult res;
    for (int iter = 0; iter < opts.max_iterations && step > step_floor; ++iter) {
        bool improved = false;
        for (std::size_t d = 0; d < n; ++d) {
            for (const double sign : {1.0, -1.0}) {
                std::vector<double> y = x;
                y[d] += sign * step;
                const double fy = guarded(f, y, evals);
                if (fy < fx) {
                    x = std::move(y);
                    fx = fy;
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) step *= 0.5;
    }
    res.converged = step <= step_floor;
    res.x = std::move(x);
    res.value = fx;
    res.evaluations = evals;
    return res;
}

std::vector<std::vector<double>> latin_hypercube(std::size_t points, std::size_t dims,
                                                 SplitMix64& rng) {
    std::vector<std::vector<double>> out(points, std::vector<double>(dims));
    std::vector<std::size_t> strata(points);
    for (std::size_t d = 0; d < dims; ++d) {
        std::iota(strata.begin(), strata.end(), std::size_t{0});
        for (std::size_t i = points; i > 1; --i) {
            const std::size_t j = rng.next() % i;
            std::swap(strata[i - 1], strata[j]);
        }
        for (std::size_t p = 0; p < points; ++p)
            out[p][d] = (static_cast<double>(strata[p]) + 0.5) / static_cast<double>(points);
    }
    return out;
}

} // namespace tearfilm
