#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tearfilm/constants.hpp"
#include "tearfilm/model.hpp"
#include "tearfilm/preprocess.hpp"
#include "tearfilm/solve.hpp"

namespace tearfilm {

// Physically plausible dimensional ranges. The constant-strain and
// initial-flow-rate ranges differ on purpose.
struct BoxConstraints {
    double evap_min_um_per_min = 0.0;
    double evap_max_um_per_min = 40.0;
    double strain_min_per_s = -1.0;
    double strain_max_per_s = 2.0;
    double flow_min_per_s = -1.0;
    double flow_max_per_s = 5.0;
    double decay_min_per_s = 0.0;
    double decay_max_per_s = 2.0;
};

// Lower/upper bounds for the free parameters of one model, in fit order:
// evaporation, then strain or initial flow rate, then decay.
std::pair<std::vector<double>, std::vector<double>> box_bounds(ModelKind kind,
                                                               const BoxConstraints& box);

enum class MisfitForm { trapezoid, mean };

struct FitConfig {
    BoxConstraints box;
    MisfitForm form = MisfitForm::trapezoid;
    double rel_tol = 1e-5;
    double abs_tol = 1e-7;
    int lhs_starts = 8;
    double penalty = 1e6;
    double delta_sus = 0.1;    // sustained-increase duration, fraction of the window
    bool cross_check = false;  // second optimizer pass must agree on the value
    double cross_check_rel = 1e-4;
    std::uint64_t seed = 0x7465617266697401ULL;
    int retry_cap = 3;
    double ordering_slack = 1e-9;
    SolveOptions solver;
};

void validate(const FitConfig& cfg);

// Agreement between the model intensity and the data: time-weighted
// (trapezoid) or plain mean of squared residuals. Integration failures come
// back as the penalty value; a film that breaks up inside the window is not
// penalized, its intensity just stays at the terminal (dark) value.
double misfit(const ModelParams& params, const CleanSeries& data,
              const NondimGroups& groups, double f0, const FitConfig& cfg = {});

// misfit plus the early-termination rule: thickening or brightening
// sustained for delta_sus of the window interrupts the solve and returns
// penalty - fraction_completed, sloping gently away from the bad region.
double penalized_objective(const ModelParams& params, const CleanSeries& data,
                           const NondimGroups& groups, double f0,
                           const FitConfig& cfg = {});

struct FitResult {
    ModelKind kind = ModelKind::O;
    ModelParams nondim;
    DimensionalParams dim;
    double residual = 0.0;
    Trajectory trajectory;
    std::vector<double> intensity;
    std::vector<bool> at_lower;  // per free parameter, fit order
    std::vector<bool> at_upper;
    bool penalized = false;
    bool converged = false;
    bool cross_check_ok = true;
    std::vector<double> winning_start;  // dimensional free parameters
};

struct FitFailed : std::runtime_error {
    FitFailed(const std::string& msg, FitResult best_point)
        : std::runtime_error(msg), best(std::move(best_point)) {}
    FitResult best;
};

// Multistart fit of one model: box center, a Latin hypercube set, the
// inherited simpler-model optimum as an extra start, and an exact evaluation
// of that embedded point so the nested model can never end up worse.
FitResult fit_model(const CleanSeries& data, ModelKind kind, const TrialScales& scales,
                    const FitConfig& cfg = {},
                    const std::optional<DimensionalParams>& inherited = std::nullopt);

struct HierarchyResult {
    FitResult o;
    FitResult f;
    FitResult d;
    bool ordering_verified = true;
    std::vector<std::string> diagnostics;
};

// O, then F seeded with O, then D seeded with F; enforces
// residual_O >= residual_F >= residual_D within the slack, retrying a
// bounded number of times before flagging the ordering unverified.
HierarchyResult fit_hierarchy(const CleanSeries& data, const TrialScales& scales,
                              const FitConfig& cfg = {});

} // namespace tearfilm
