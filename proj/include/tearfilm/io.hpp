#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "tearfilm/analysis.hpp"
#include "tearfilm/fitting.hpp"
#include "tearfilm/preprocess.hpp"

namespace tearfilm {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

// Malformed input files. The message always carries file name and, where it
// makes sense, a line number.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_text(const std::filesystem::path& path);

// Write-temp-then-rename: readers never observe a half-written file.
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);

// ---- intensity series: CSV with header t_seconds,intensity + JSON sidecar

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

RawSeries parse_series_csv(const std::string& text, const std::string& origin);
std::string series_csv(const RawSeries& series);

SeriesMetadata parse_metadata_json(const std::string& text,
                                   const std::string& origin);
std::string metadata_json(const SeriesMetadata& meta);

RawSeries read_series_csv(const std::filesystem::path& path);
SeriesMetadata read_metadata_json(const std::filesystem::path& path);
void write_series(const std::filesystem::path& csv_path, const RawSeries& series,
                  const SeriesMetadata& meta);

// ---- run configuration: flat key = value lines mirroring the CLI flags

struct RunConfig {
    std::string objective = "trapezoid";  // or "mean"
    double delta_sus = 0.1;
    double brighten_thresh = 1.10;
    int smooth_width = 5;
    double v_threshold = 2.0;
    double b1_threshold = 0.038;
    std::uint64_t seed = FitConfig{}.seed;
    int jobs = 1;
};

RunConfig parse_config(const std::string& text, const std::string& origin);
std::string config_text(const RunConfig& rc);
RunConfig read_config(const std::filesystem::path& path);

// Materialized module configs. Throws on out-of-range values.
FitConfig make_fit_config(const RunConfig& rc);
PreprocessConfig make_preprocess_config(const RunConfig& rc);
MechanismThresholds make_thresholds(const RunConfig& rc);

// ---- per-instance fit report

struct ModelFitRecord {
    DimensionalParams dim;
    ModelParams nondim;
    double residual = 0.0;
    bool penalized = false;
    bool converged = false;
    bool cross_check_ok = true;
    std::vector<bool> at_lower;
    std::vector<bool> at_upper;
    std::vector<double> winning_start;  // dimensional free parameters
};

ModelFitRecord record_of(const FitResult& fit);

struct FitReport {
    int schema_version = kSchemaVersion;
    std::string tool_version = kToolVersion;
    std::uint64_t seed = 0;
    SeriesMetadata meta;
    ScreeningReport screening;
    bool forced = false;
    bool fitted = false;
    std::optional<std::string> window_error;
    // Populated when fitted:
    double window_start_s = 0.0;
    double window_end_s = 0.0;
    TrialScales scales;
    NondimGroups groups;
    ModelFitRecord fit_o, fit_f, fit_d;
    bool ordering_verified = false;
    std::vector<std::string> diagnostics;
    InstanceSummary summary;
    RunConfig config;
};

std::string report_json(const FitReport& report);
FitReport parse_report_json(const std::string& text, const std::string& origin);
FitReport read_report(const std::filesystem::path& path);
void write_report(const std::filesystem::path& path, const FitReport& report);

// ---- batch roll-up: carries the fitted instances so threshold sweeps and
// report regeneration can rework a finished run without refitting

struct BatchSummary {
    int schema_version = kSchemaVersion;
    std::string tool_version = kToolVersion;
    RunConfig config;
    int n_files = 0;
    int n_fitted = 0;
    int n_screened = 0;
    int n_window_failed = 0;
    int n_errors = 0;
    std::vector<InstanceSummary> instances;
};

std::string batch_summary_json(const BatchSummary& summary);
BatchSummary parse_batch_summary_json(const std::string& text,
                                      const std::string& origin);
BatchSummary read_batch_summary(const std::filesystem::path& path);

} // namespace tearfilm
