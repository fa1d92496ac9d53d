#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tearfilm/constants.hpp"
#include "tearfilm/fitting.hpp"
#include "tearfilm/preprocess.hpp"

namespace tearfilm {

// Osmolarity above which the literature reports sensory discomfort, in mOsM.
inline constexpr double kDiscomfortMosm = 450.0;

// Quadrant thresholds on the full model's dimensional parameters. Instances
// at or above a threshold count as "high" on that axis.
struct MechanismThresholds {
    double evap_um_per_min = 2.0;
    double flow_per_s = 0.038;
};

// The four thinning mechanisms: high/low evaporation crossed with high/low
// extensional flow. "gtf" (good tear film) is the low/low corner.
enum class Mechanism { evap, flow, mixed, gtf };

std::string to_string(Mechanism m);
Mechanism mechanism_from_string(const std::string& name);

Mechanism classify(double evap_um_per_min, double flow_per_s,
                   const MechanismThresholds& thr = {});

// Sample median; the midpoint of the central pair for even counts.
// Throws std::invalid_argument on empty input.
double median(std::vector<double> values);

// Population-derived flow threshold: the median of the fitted flow rates.
double median_flow_threshold(const std::vector<double>& flow_rates_per_s);

struct FinalOsmolarity {
    double nondim = 1.0;            // c at the end of the fitted trajectory
    double mosm = 302.0;            // the same in mOsM
    bool at_termination = false;    // trajectory ended early (breakup etc.)
};

// Osmolarity at the last fitted sample. A trajectory cut short by an event
// yields the value at the cut, flagged.
FinalOsmolarity final_osmolarity(const FitResult& fit,
                                 const PhysicalConstants& pc = {});

// Average thinning over the window, (h0*(1 - h_end)/t_s), in um/min.
double mean_thinning_rate(const FitResult& fit, const TrialScales& scales);

// Everything reported per instance, in dimensional units where applicable.
struct InstanceSummary {
    std::string subject_id;
    std::string trial_id;
    std::string roi_id;
    double evap_um_per_min = 0.0;       // full-model parameters
    double strain_rate_per_s = 0.0;
    double strain_decay_per_s = 0.0;
    double osmolarity_nondim = 1.0;
    double osmolarity_mosm = 302.0;
    bool osmolarity_at_termination = false;
    double final_thickness_nondim = 1.0;  // h_end / h0
    double thinning_rate_um_per_min = 0.0;
    Mechanism mechanism = Mechanism::gtf;
    bool discomfort = false;
    double h0_um = 0.0;
    double f0_percent = 0.0;
    double window_s = 0.0;
    std::optional<double> roi_x;
    std::optional<double> roi_y;
};

// Condenses one fitted hierarchy. Classification and parameter reporting use
// the full model; the supplied scales must be the ones the fit used.
InstanceSummary summarize(const HierarchyResult& hr, const SeriesMetadata& meta,
                          const TrialScales& scales,
                          const MechanismThresholds& thr = {},
                          const PhysicalConstants& pc = {});

struct MechanismCounts {
    int evap = 0;
    int flow = 0;
    int mixed = 0;
    int gtf = 0;

    int total() const { return evap + flow + mixed + gtf; }
    void add(Mechanism m);
};

struct SubjectCounts {
    std::string subject_id;
    MechanismCounts counts;
    bool excluded = false;  // too few instances for subject-level analysis
};

struct PopulationSummary {
    std::vector<SubjectCounts> by_subject;  // sorted by subject id
    MechanismCounts overall;
    int min_subject_instances = 20;
};

PopulationSummary tabulate(const std::vector<InstanceSummary>& instances,
                           int min_subject_instances = 20);

// Equal-width bins spanning [lo, hi]; a degenerate range is widened to unit
// width so every value still lands in a bin.
struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<int> counts;
};

Histogram histogram(const std::vector<double>& values, int bins = 30);

// Plot-ready tables. Rows are ordered by (subject, trial, roi) so output is
// independent of input order; numbers round-trip exactly.
std::string scatter_csv(std::vector<InstanceSummary> instances);
std::string histogram_csv(const std::vector<InstanceSummary>& instances,
                          int bins = 30);
std::string counts_csv(const PopulationSummary& summary);

} // namespace tearfilm
