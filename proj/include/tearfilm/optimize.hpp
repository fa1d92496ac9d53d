#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace tearfilm {

// Splittable counter generator; cheap, deterministic, good enough for start
// points and synthetic noise seeding.
struct SplitMix64 {
    std::uint64_t state = 0;

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

// Smooth bijection between the open box and R^n, so the simplex can roam
// freely while every candidate stays strictly inside the constraints.
class BoxTransform {
  public:
    BoxTransform(std::vector<double> lower, std::vector<double> upper);

    std::size_t size() const { return lo_.size(); }
    const std::vector<double>& lower() const { return lo_; }
    const std::vector<double>& upper() const { return hi_; }

    std::vector<double> to_unbounded(const std::vector<double>& x) const;
    std::vector<double> to_box(const std::vector<double>& z) const;

  private:
    std::vector<double> lo_, hi_;
};

struct OptimizeOptions {
    double rel_tol = 1e-5;
    double abs_tol = 1e-7;
    int max_iterations = 4000;
    double initial_step = 0.5;
};

struct OptimizeResult {
    std::vector<double> x;
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

using Objective = std::function<double(const std::vector<double>&)>;

// Nelder-Mead simplex search on unbounded coordinates.
OptimizeResult nelder_mead(const Objective& f, const std::vector<double>& start,
                           const OptimizeOptions& opts = {});

// Coordinate pattern search with shrinking steps; used as an independent
// cross-check on the simplex result.
OptimizeResult compass_search(const Objective& f, const std::vector<double>& start,
                              const OptimizeOptions& opts = {});

// Midpoint Latin hypercube sample in the unit cube: each dimension visits
// every stratum exactly once. Deterministic given the generator state.
std::vector<std::vector<double>> latin_hypercube(std::size_t points, std::size_t dims,
                                                 SplitMix64& rng);

} // namespace tearfilm
