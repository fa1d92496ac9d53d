// tearfit: fit tear-film thinning models to fluorescence intensity series.
//
// Subcommands:
//   fit     one CSV + JSON sidecar -> one report
//   batch   a directory of CSVs -> per-file reports + population roll-ups
//   synth   generate synthetic series with known ground truth
//   sweep   reclassify a finished batch over a threshold grid
//   report  regenerate roll-ups from existing per-file reports

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tearfilm/analysis.hpp"
#include "tearfilm/fitting.hpp"
#include "tearfilm/format.hpp"
#include "tearfilm/io.hpp"
#include "tearfilm/preprocess.hpp"
#include "tearfilm/synth.hpp"

namespace fs = std::filesystem;
using namespace tearfilm;

namespace {

// Exit codes: 0 success, 1 error (bad input, no usable window), 2 data
// rejected by screening. Batch returns 1 only when every file errored.
constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitScreened = 2;

std::string brief(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += ", ";
        out += p;
    }
    return out;
}

fs::path report_path_for(const fs::path& csv_path) {
    fs::path p = csv_path;
    p.replace_extension(".report.json");
    return p;
}

// Batch artifacts living next to the inputs must not be re-ingested as data.
bool is_rollup_name(const fs::path& name) {
    return name == "counts.csv" || name == "scatter.csv" ||
           name == "histograms.csv" || name == "sweep.csv";
}

struct FitOutcome {
    FitReport report;
    int exit_code = kExitOk;
    std::string note;
};

FitOutcome fit_one(const RawSeries& raw, const SeriesMetadata& meta,
                   const RunConfig& rc) {
    FitOutcome oc;
    FitReport& rep = oc.report;
    rep.seed = rc.seed;
    rep.meta = meta;
    rep.config = rc;

    const PreprocessResult pre = preprocess(raw, meta, make_preprocess_config(rc));
    rep.screening = pre.screening;
    rep.forced = pre.forced;
    if (!pre.screening.accepted && !pre.forced) {
        oc.exit_code = kExitScreened;
        oc.note = "screened out (" + join(pre.screening.reasons) + ")";
        return oc;
    }
    if (!pre.clean) {
        rep.window_error = pre.window_error.value_or("no usable window");
        oc.exit_code = kExitError;
        oc.note = "window selection failed: " + *rep.window_error;
        return oc;
    }

    const TrialScales scales =
        make_scales(meta.h0_um.value(), pre.clean->window_s, meta.f0_percent.value());
    const HierarchyResult hr = fit_hierarchy(*pre.clean, scales, make_fit_config(rc));

    rep.fitted = true;
    rep.window_start_s = pre.clean->window_start_s;
    rep.window_end_s = pre.clean->window_end_s;
    rep.scales = scales;
    rep.groups = derive_groups(scales);
    rep.fit_o = record_of(hr.o);
    rep.fit_f = record_of(hr.f);
    rep.fit_d = record_of(hr.d);
    rep.ordering_verified = hr.ordering_verified;
    rep.diagnostics = hr.diagnostics;
    rep.summary = summarize(hr, meta, scales, make_thresholds(rc));

    const InstanceSummary& s = rep.summary;
    oc.note = "mechanism=" + to_string(s.mechanism) +
              " v'=" + brief(s.evap_um_per_min) + " um/min" +
              " b1'=" + brief(s.strain_rate_per_s) + " 1/s" +
              " osmolarity=" + brief(s.osmolarity_mosm) + " mOsM";
    if (!rep.ordering_verified) oc.note += " [ordering unverified]";
    return oc;
}

void write_rollups(const fs::path& out_dir, const BatchSummary& bs) {
    write_text_atomic(out_dir / "summary.json", batch_summary_json(bs));
    write_text_atomic(out_dir / "counts.csv", counts_csv(tabulate(bs.instances)));
    write_text_atomic(out_dir / "scatter.csv", scatter_csv(bs.instances));
    write_text_atomic(out_dir / "histograms.csv", histogram_csv(bs.instances));
}

int run_fit(const fs::path& input, fs::path out, const RunConfig& rc) {
    if (out.empty()) out = report_path_for(input);
    const RawSeries raw = read_series_csv(input);
    const SeriesMetadata meta = read_metadata_json(sidecar_path(input));
    const FitOutcome oc = fit_one(raw, meta, rc);
    write_report(out, oc.report);
    std::cout << input.filename().string() << ": " << oc.note << " -> "
              << out.string() << "\n";
    return oc.exit_code;
}

std::vector<fs::path> input_files(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw ParseError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv" &&
            !is_rollup_name(entry.path().filename()))
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

int run_batch(const fs::path& dir, fs::path out_dir, const RunConfig& rc) {
    if (out_dir.empty()) out_dir = dir;
    const std::vector<fs::path> files = input_files(dir);
    fs::create_directories(out_dir);

    struct Slot {
        bool errored = false;
        std::string error;
        FitOutcome outcome;
    };
    std::vector<Slot> slots(files.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= files.size()) return;
            try {
                const RawSeries raw = read_series_csv(files[i]);
                const SeriesMetadata meta = read_metadata_json(sidecar_path(files[i]));
                slots[i].outcome = fit_one(raw, meta, rc);
            } catch (const std::exception& e) {
                slots[i].errored = true;
                slots[i].error = e.what();
            }
        }
    };
    const int jobs = std::clamp<int>(rc.jobs, 1,
                                     static_cast<int>(files.empty() ? 1 : files.size()));
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    BatchSummary bs;
    bs.config = rc;
    bs.n_files = static_cast<int>(files.size());
    for (std::size_t i = 0; i < files.size(); ++i) {
        const std::string name = files[i].filename().string();
        if (slots[i].errored) {
            ++bs.n_errors;
            std::cerr << name << ": error: " << slots[i].error << "\n";
            continue;
        }
        const FitOutcome& oc = slots[i].outcome;
        write_report(out_dir / report_path_for(files[i].filename()), oc.report);
        std::cout << name << ": " << oc.note << "\n";
        if (oc.exit_code == kExitOk) {
            ++bs.n_fitted;
            bs.instances.push_back(oc.report.summary);
        } else if (oc.exit_code == kExitScreened) {
            ++bs.n_screened;
        } else {
            ++bs.n_window_failed;
        }
    }
    write_rollups(out_dir, bs);
    std::cout << "batch: " << bs.n_fitted << " fitted, " << bs.n_screened
              << " screened, " << bs.n_window_failed << " without window, "
              << bs.n_errors << " errors of " << bs.n_files << " files -> "
              << out_dir.string() << "\n";
    return (bs.n_files > 0 && bs.n_errors == bs.n_files) ? kExitError : kExitOk;
}

// "lo:hi:n" -> n evenly spaced points; bare default is the single point `at`.
std::vector<double> parse_range(const std::string& text, double at) {
    if (text.empty()) return {at};
    double lo = 0.0, hi = 0.0;
    long n = 0;
    const auto first = text.find(':');
    const auto second = text.find(':', first + 1);
    if (first == std::string::npos || second == std::string::npos ||
        !parse_number(text.substr(0, first), lo) ||
        !parse_number(text.substr(first + 1, second - first - 1), hi))
        throw ParseError("range must be lo:hi:n, got '" + text + "'");
    try {
        n = std::stol(text.substr(second + 1));
    } catch (const std::exception&) {
        throw ParseError("range must be lo:hi:n, got '" + text + "'");
    }
    if (n < 1 || hi < lo)
        throw ParseError("range needs hi >= lo and n >= 1, got '" + text + "'");
    std::vector<double> points;
    for (long i = 0; i < n; ++i)
        points.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) /
                                                static_cast<double>(n - 1));
    return points;
}

int run_sweep(const fs::path& batch_dir, fs::path out, const std::string& v_range,
              const std::string& b1_range, const RunConfig& rc) {
    if (out.empty()) out = batch_dir / "sweep.csv";
    const BatchSummary bs = read_batch_summary(batch_dir / "summary.json");
    const std::vector<double> vs = parse_range(v_range, rc.v_threshold);
    const std::vector<double> b1s = parse_range(b1_range, rc.b1_threshold);

    std::string csv = "v_threshold_um_per_min,b1_threshold_per_s,evap,flow,mixed,gtf,total\n";
    for (const double v : vs)
        for (const double b1 : b1s) {
            MechanismCounts counts;
            for (const auto& inst : bs.instances)
                counts.add(classify(inst.evap_um_per_min, inst.strain_rate_per_s,
                                    MechanismThresholds{v, b1}));
            csv += format_number(v) + ',' + format_number(b1) + ',' +
                   std::to_string(counts.evap) + ',' + std::to_string(counts.flow) +
                   ',' + std::to_string(counts.mixed) + ',' +
                   std::to_string(counts.gtf) + ',' + std::to_string(counts.total()) +
                   '\n';
        }
    write_text_atomic(out, csv);
    std::cout << "sweep: " << vs.size() * b1s.size() << " grid points over "
              << bs.instances.size() << " instances -> " << out.string() << "\n";
    return kExitOk;
}

int run_report(const fs::path& batch_dir, fs::path out_dir, const RunConfig& rc) {
    if (out_dir.empty()) out_dir = batch_dir;
    if (!fs::is_directory(batch_dir))
        throw ParseError("not a directory: " + batch_dir.string());
    fs::create_directories(out_dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(batch_dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.size() > 12 &&
            name.substr(name.size() - 12) == ".report.json")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    BatchSummary bs;
    bs.config = rc;
    bs.n_files = static_cast<int>(files.size());
    for (const auto& path : files) {
        const FitReport rep = read_report(path);
        if (rep.fitted) {
            ++bs.n_fitted;
            bs.instances.push_back(rep.summary);
        } else if (rep.window_error) {
            ++bs.n_window_failed;
        } else {
            ++bs.n_screened;
        }
    }
    write_rollups(out_dir, bs);
    std::cout << "report: " << bs.n_fitted << " fitted of " << bs.n_files
              << " reports -> " << out_dir.string() << "\n";
    return kExitOk;
}

int run_synth_single(const SynthSpec& spec, const fs::path& out) {
    validate(spec);
    const SynthResult result = generate(spec);
    write_series(out, result.series, result.meta);
    std::cout << out.string() << ": " << result.series.t_s.size() << " samples";
    if (result.termination != Termination::none)
        std::cout << " (truncated: " << to_string(result.termination) << ")";
    std::cout << "\n";
    return kExitOk;
}

int run_synth_planted(int per_quadrant, const fs::path& out_dir,
                      double sigma_override, bool have_sigma, const RunConfig& rc) {
    fs::create_directories(out_dir);
    std::vector<SynthSpec> specs = planted_population(per_quadrant, rc.seed);
    const MechanismThresholds thr = make_thresholds(rc);
    nlohmann::json truth = nlohmann::json::array();
    for (auto& spec : specs) {
        if (have_sigma) spec.noise_sigma = sigma_override;
        const SynthResult result = generate(spec);
        const std::string name =
            spec.subject_id + "_" + spec.trial_id + "_" + spec.roi_id + ".csv";
        write_series(out_dir / name, result.series, result.meta);
        const Mechanism planted = classify(
            spec.truth.evap_um_per_min,
            spec.kind == ModelKind::O ? 0.0 : spec.truth.strain_rate_per_s, thr);
        nlohmann::json row;
        row["file"] = name;
        row["subject_id"] = spec.subject_id;
        row["trial_id"] = spec.trial_id;
        row["roi_id"] = spec.roi_id;
        row["mechanism"] = to_string(planted);
        row["model"] = to_string(spec.kind);
        row["evap_um_per_min"] = spec.truth.evap_um_per_min;
        row["strain_rate_per_s"] = spec.truth.strain_rate_per_s;
        row["strain_decay_per_s"] = spec.truth.strain_decay_per_s;
        row["h0_um"] = spec.h0_um;
        row["window_s"] = spec.window_s;
        row["f0_percent"] = spec.f0_percent;
        row["sample_hz"] = spec.sample_hz;
        row["noise_sigma"] = spec.noise_sigma;
        row["seed"] = spec.seed;
        truth.push_back(row);
    }
    write_text_atomic(out_dir / "truth.json", truth.dump(2) + "\n");
    std::cout << "planted: " << specs.size() << " series -> " << out_dir.string()
              << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tear-film thinning model fits from fluorescence intensity"};
    app.set_version_flag("--version", std::string("tearfit ") + kToolVersion);
    app.require_subcommand(1);

    std::string config_path;
    RunConfig flag_values;
    app.add_option("--config", config_path, "run configuration file (key = value lines)");
    auto* opt_seed = app.add_option("--seed", flag_values.seed, "fitting RNG seed");
    auto* opt_objective =
        app.add_option("--objective", flag_values.objective, "misfit form")
            ->check(CLI::IsMember({"trapezoid", "mean"}));
    auto* opt_delta = app.add_option("--delta-sus", flag_values.delta_sus,
                                     "sustained-increase duration, fraction of window");
    auto* opt_brighten = app.add_option("--brighten-thresh", flag_values.brighten_thresh,
                                        "screening: max brightening ratio");
    auto* opt_smooth = app.add_option("--smooth-width", flag_values.smooth_width,
                                      "smoothing width in samples (odd)");
    auto* opt_v = app.add_option("--v-threshold", flag_values.v_threshold,
                                 "high-evaporation threshold, um/min");
    auto* opt_b1 = app.add_option("--b1-threshold", flag_values.b1_threshold,
                                  "high-flow threshold, 1/s");
    auto* opt_jobs = app.add_option("--jobs", flag_values.jobs, "batch worker threads")
                         ->check(CLI::PositiveNumber);

    auto* fit_cmd = app.add_subcommand("fit", "fit one intensity series");
    fit_cmd->fallthrough();
    std::string fit_in, fit_out;
    fit_cmd->add_option("input", fit_in, "intensity CSV; JSON sidecar required")
        ->required();
    fit_cmd->add_option("--out", fit_out, "report path (default: input with .report.json)");

    auto* batch_cmd = app.add_subcommand("batch", "fit every CSV in a directory");
    batch_cmd->fallthrough();
    std::string batch_in, batch_out;
    batch_cmd->add_option("dir", batch_in, "directory of CSV + sidecar pairs")
        ->required();
    batch_cmd->add_option("--out-dir", batch_out, "output directory (default: input dir)");

    auto* synth_cmd = app.add_subcommand("synth", "generate synthetic series");
    synth_cmd->fallthrough();
    SynthSpec spec;
    std::string synth_model = "D", synth_out, synth_dir;
    int planted = 0;
    double sigma = 0.0;
    synth_cmd->add_option("--model", synth_model, "strain model: O, F, or D")
        ->check(CLI::IsMember({"O", "F", "D"}));
    synth_cmd->add_option("--v", spec.truth.evap_um_per_min, "evaporation rate, um/min");
    synth_cmd->add_option("--b1", spec.truth.strain_rate_per_s, "strain rate, 1/s");
    synth_cmd->add_option("--b2", spec.truth.strain_decay_per_s, "strain decay, 1/s");
    synth_cmd->add_option("--h0", spec.h0_um, "initial thickness, um");
    synth_cmd->add_option("--window", spec.window_s, "duration, s");
    synth_cmd->add_option("--f0", spec.f0_percent, "initial concentration, percent");
    synth_cmd->add_option("--hz", spec.sample_hz, "sample rate, Hz");
    auto* opt_sigma = synth_cmd->add_option("--sigma", sigma,
                                            "noise sigma, fraction of start value");
    synth_cmd->add_option("--scale", spec.raw_scale, "camera-count scale");
    synth_cmd->add_option("--quantize", spec.quantize_step, "count quantization step");
    synth_cmd->add_option("--subject", spec.subject_id, "subject id");
    synth_cmd->add_option("--trial", spec.trial_id, "trial id");
    synth_cmd->add_option("--roi", spec.roi_id, "region id");
    synth_cmd->add_flag("--force-include", spec.force_include,
                        "mark the series to bypass screening");
    auto* opt_out = synth_cmd->add_option("--out", synth_out, "output CSV path");
    auto* opt_planted =
        synth_cmd->add_option("--planted", planted,
                              "instead: per-mechanism count for a labeled population")
            ->check(CLI::PositiveNumber);
    synth_cmd->add_option("--out-dir", synth_dir, "population output directory");

    auto* sweep_cmd =
        app.add_subcommand("sweep", "reclassify a finished batch over threshold grids");
    sweep_cmd->fallthrough();
    std::string sweep_dir, sweep_out, v_range, b1_range;
    sweep_cmd->add_option("--batch-dir", sweep_dir, "directory holding summary.json")
        ->required();
    sweep_cmd->add_option("--v-range", v_range, "lo:hi:n evaporation grid, um/min");
    sweep_cmd->add_option("--b1-range", b1_range, "lo:hi:n strain-rate grid, 1/s");
    sweep_cmd->add_option("--out", sweep_out, "default: <batch-dir>/sweep.csv");

    auto* report_cmd =
        app.add_subcommand("report", "regenerate roll-ups from per-file reports");
    report_cmd->fallthrough();
    std::string report_dir, report_out;
    report_cmd->add_option("--batch-dir", report_dir, "directory of *.report.json")
        ->required();
    report_cmd->add_option("--out-dir", report_out, "output directory (default: batch dir)");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig rc;
        if (!config_path.empty()) rc = read_config(config_path);
        if (opt_seed->count()) rc.seed = flag_values.seed;
        if (opt_objective->count()) rc.objective = flag_values.objective;
        if (opt_delta->count()) rc.delta_sus = flag_values.delta_sus;
        if (opt_brighten->count()) rc.brighten_thresh = flag_values.brighten_thresh;
        if (opt_smooth->count()) rc.smooth_width = flag_values.smooth_width;
        if (opt_v->count()) rc.v_threshold = flag_values.v_threshold;
        if (opt_b1->count()) rc.b1_threshold = flag_values.b1_threshold;
        if (opt_jobs->count()) rc.jobs = flag_values.jobs;

        if (*fit_cmd) return run_fit(fit_in, fit_out, rc);
        if (*batch_cmd) return run_batch(batch_in, batch_out, rc);
        if (*synth_cmd) {
            if (opt_planted->count()) {
                if (synth_dir.empty())
                    throw ParseError("--planted requires --out-dir");
                return run_synth_planted(planted, synth_dir, sigma,
                                         opt_sigma->count() > 0, rc);
            }
            if (!opt_out->count())
                throw ParseError("synth needs --out (or --planted with --out-dir)");
            spec.kind = model_kind_from_string(synth_model);
            spec.noise_sigma = sigma;
            spec.seed = rc.seed;
            return run_synth_single(spec, synth_out);
        }
        if (*sweep_cmd) return run_sweep(sweep_dir, sweep_out, v_range, b1_range, rc);
        if (*report_cmd) return run_report(report_dir, report_out, rc);
    } catch (const std::exception& e) {
        std::cerr << "tearfit: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
