#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tearfilm/analysis.hpp"
#include "tearfilm/constants.hpp"
#include "tearfilm/fitting.hpp"
#include "tearfilm/model.hpp"
#include "tearfilm/preprocess.hpp"
#include "tearfilm/solve.hpp"

namespace tearfilm {

// Ground truth for one generated instance. The dimensional parameters must
// lie inside the fitting box so round trips are meaningful.
struct SynthSpec {
    ModelKind kind = ModelKind::D;
    DimensionalParams truth;
    double h0_um = 3.0;
    double window_s = 3.0;
    double f0_percent = 0.2;
    double sample_hz = 10.0;
    double noise_sigma = 0.0;   // Gaussian sigma as a fraction of the start value
    double raw_scale = 200.0;   // arbitrary camera-count scale
    double quantize_step = 0.0; // > 0 rounds counts to this step, 0 disables
    std::uint64_t seed = 0;
    std::string subject_id = "synth";
    std::string trial_id = "t1";
    std::string roi_id = "r1";
    bool force_include = false;
};

void validate(const SynthSpec& spec, const BoxConstraints& box = {});

struct SynthResult {
    RawSeries series;
    SeriesMetadata meta;
    // Forward-solve truncation: the series simply ends where the film did.
    Termination termination = Termination::none;
};

// Forward model -> counts -> seeded noise -> clip at zero -> optional
// quantization. Bit-identical for identical spec (seed included).
SynthResult generate(const SynthSpec& spec, const BoxConstraints& box = {});

// One planted case pushed through preprocess -> hierarchy fit -> classify.
struct RecoveryCase {
    SynthSpec spec;
    bool screened_out = false;
    bool fit_error = false;
    std::string error;
    bool ordering_verified = false;
    double residual = 0.0;            // full-model misfit
    double evap_err_rel = 0.0;        // |fit - truth| / |truth|, absolute if truth = 0
    double strain_rate_err_rel = 0.0;
    double strain_decay_err_rel = 0.0;
    Mechanism planted = Mechanism::gtf;
    Mechanism classified = Mechanism::gtf;
    bool classification_match = false;
};

struct RecoveryReport {
    std::vector<RecoveryCase> cases;
    int fitted = 0;
    int matched = 0;  // classification agreement among fitted cases
};

// Failures never abort the suite; each case records its own outcome.
RecoveryReport recovery_suite(const std::vector<SynthSpec>& specs,
                              const FitConfig& fit_cfg = {},
                              const PreprocessConfig& pre_cfg = {},
                              const MechanismThresholds& thr = {});

// Deterministic population with per_quadrant instances planted in each
// mechanism quadrant. Recipes keep every case at least 20% away from both
// classification thresholds, clear of breakup, and able to pass the
// screening rules without overrides.
std::vector<SynthSpec> planted_population(int per_quadrant, std::uint64_t seed);

} // namespace tearfilm
