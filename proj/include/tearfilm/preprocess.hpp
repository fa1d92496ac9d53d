#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tearfilm {

// One extracted intensity trace: seconds from trial start plus pixel values
// in whatever units the camera produced. Values are normalized away early;
// only ratios ever matter downstream.
struct RawSeries {
    std::vector<double> t_s;
    std::vector<double> value;
};

struct SeriesMetadata {
    std::string subject_id;
    std::string trial_id;
    std::string roi_id;
    std::optional<double> h0_um;        // initial thickness estimate
    std::optional<double> f0_percent;   // fluorescein concentration, % by mass
    std::optional<double> roi_x;
    std::optional<double> roi_y;
    bool force_include = false;         // manual override: fit even if screened out
    // Externally computed image-quality indicators, carried through untouched.
    std::optional<double> min_location_fraction;
    std::optional<double> breakup_intensity;
};

struct PreprocessConfig {
    double h0_min_um = 1.0;
    double h0_max_um = 10.0;
    double f0_max_percent = 0.35;
    int despike_window = 5;            // samples, odd
    double despike_nsigma = 3.0;
    int smooth_width = 5;              // samples, odd
    double brighten_ratio = 1.10;
    double drop_ratio = 0.75;
    double edge_fraction = 0.10;       // slice used for the edge medians
    std::size_t min_samples = 10;      // below this the edge medians are meaningless
    double min_window_s = 3.0;
    double plateau_drop_frac_per_s = 0.01;
    double rate_tie_rel = 1e-9;        // windows whose rates agree this closely tie
};

void validate(const PreprocessConfig& cfg);

// Reason identifiers are fixed strings: h0_out_of_range, f0_too_high,
// brightening, insufficient_drop, too_short.
struct ScreeningReport {
    bool accepted = true;
    std::vector<std::string> reasons;

    void reject(std::string reason);
};

ScreeningReport merge(const std::vector<ScreeningReport>& parts);

ScreeningReport screen_scales(const SeriesMetadata& meta, const PreprocessConfig& cfg);
ScreeningReport screen_brightening(const std::vector<double>& values,
                                   const PreprocessConfig& cfg);
ScreeningReport screen_drop(const std::vector<double>& values,
                            const PreprocessConfig& cfg);
ScreeningReport screen(const RawSeries& raw, const SeriesMetadata& meta,
                       const PreprocessConfig& cfg);

std::vector<double> despike(const std::vector<double>& values,
                            const PreprocessConfig& cfg);
std::vector<double> smooth(const std::vector<double>& values,
                           const PreprocessConfig& cfg);

// Inclusive sample range [first, last] with its span in seconds.
struct Window {
    std::size_t first = 0;
    std::size_t last = 0;
    double start_s = 0.0;
    double end_s = 0.0;
    double rate = 0.0;  // average decrease over the window, per second
};

struct NoWindowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Steepest sustained decline: pick the window maximizing the average decrease
// of the despiked series among spans >= min_window_s (ties: longer, then
// earlier), trim leading non-decreases and trailing plateaus of the smoothed
// series, and reselect inside the trimmed range until stable. Throws
// NoWindowError when nothing qualifies.
Window select_window(const std::vector<double>& t_s,
                     const std::vector<double>& despiked,
                     const std::vector<double>& smoothed,
                     const PreprocessConfig& cfg);

// Windowed series mapped onto t in [0,1] with I(0) = 1.
struct CleanSeries {
    std::vector<double> t;
    std::vector<double> intensity;
    double window_start_s = 0.0;
    double window_end_s = 0.0;
    double window_s = 0.0;
};

CleanSeries normalize(const std::vector<double>& t_s,
                      const std::vector<double>& values, const Window& win);

struct PreprocessResult {
    ScreeningReport screening;
    bool forced = false;  // screened out but kept by force_include
    std::vector<double> despiked;
    std::vector<double> smoothed;
    std::optional<Window> window;
    std::optional<std::string> window_error;
    std::optional<CleanSeries> clean;
};

PreprocessResult preprocess(const RawSeries& raw, const SeriesMetadata& meta,
                            const PreprocessConfig& cfg = {});

} // namespace tearfilm
