#include "tearfilm/io.hpp"

#include <fstream>
#include <json.hpp>

#include "tearfilm/format.hpp"

namespace tearfilm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& origin, std::size_t line,
                       const std::string& message) {
    throw ParseError(origin + ":" + std::to_string(line) + ": " + message);
}

std::size_t line_of_byte(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        fail(origin, line_of_byte(text, e.byte), e.what());
    }
}

std::string trimmed(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double require_finite(const std::string& origin, std::size_t line,
                      const std::string& token) {
    double v = 0.0;
    if (!parse_number(token, v) || !std::isfinite(v))
        fail(origin, line, "expected a finite number, got '" + token + "'");
    return v;
}

double number_field(const json& j, const char* key, const std::string& origin) {
    if (!j.contains(key))
        throw ParseError(origin + ": missing metadata field: " + key);
    if (!j.at(key).is_number())
        throw ParseError(origin + ": metadata field " + key + " must be a number");
    return j.at(key).get<double>();
}

std::string string_field(const json& j, const char* key,
                         const std::string& origin) {
    if (!j.contains(key))
        throw ParseError(origin + ": missing metadata field: " + key);
    if (!j.at(key).is_string())
        throw ParseError(origin + ": metadata field " + key + " must be a string");
    return j.at(key).get<std::string>();
}

} // namespace

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot read " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    if (in.bad()) throw ParseError("read failed on " + path.string());
    return text;
}

void write_text_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed on " + tmp.string());
    }
    fs::rename(tmp, path);
}

fs::path sidecar_path(const fs::path& csv_path) {
    fs::path p = csv_path;
    p.replace_extension(".json");
    return p;
}

RawSeries parse_series_csv(const std::string& text, const std::string& origin) {
    RawSeries series;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(
            pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        line = trimmed(line);
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "t_seconds,intensity")
                fail(origin, 1, "expected header 't_seconds,intensity'");
            continue;
        }
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
            fail(origin, line_no, "expected exactly two comma-separated fields");
        const double t = require_finite(origin, line_no, line.substr(0, comma));
        const double v = require_finite(origin, line_no, line.substr(comma + 1));
        if (!series.t_s.empty() && !(t > series.t_s.back()))
            fail(origin, line_no, "time values must be strictly increasing");
        series.t_s.push_back(t);
        series.value.push_back(v);
    }
    if (series.t_s.empty())
        throw ParseError(origin + ": no data rows");
    return series;
}

std::string series_csv(const RawSeries& series) {
    std::string out = "t_seconds,intensity\n";
    for (std::size_t i = 0; i < series.t_s.size(); ++i)
        out += format_number(series.t_s[i]) + ',' +
               format_number(series.value[i]) + '\n';
    return out;
}

SeriesMetadata parse_metadata_json(const std::string& text,
                                   const std::string& origin) {
    const json j = parse_json(text, origin);
    if (!j.is_object()) throw ParseError(origin + ": metadata must be a JSON object");
    SeriesMetadata m;
    m.subject_id = string_field(j, "subject_id", origin);
    m.trial_id = string_field(j, "trial_id", origin);
    m.roi_id = string_field(j, "roi_id", origin);
    m.h0_um = number_field(j, "h0_um", origin);
    m.f0_percent = number_field(j, "f0_percent", origin);
    const auto optional_number = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key)) return std::nullopt;
        return number_field(j, key, origin);
    };
    m.roi_x = optional_number("roi_x");
    m.roi_y = optional_number("roi_y");
    m.min_location_fraction = optional_number("min_location_fraction");
    m.breakup_intensity = optional_number("breakup_intensity");
    if (j.contains("force_include")) {
        if (!j.at("force_include").is_boolean())
            throw ParseError(origin + ": metadata field force_include must be a bool");
        m.force_include = j.at("force_include").get<bool>();
    }
    return m;
}

std::string metadata_json(const SeriesMetadata& meta) {
    json j;
    j["subject_id"] = meta.subject_id;
    j["trial_id"] = meta.trial_id;
    j["roi_id"] = meta.roi_id;
    if (meta.h0_um) j["h0_um"] = *meta.h0_um;
    if (meta.f0_percent) j["f0_percent"] = *meta.f0_percent;
    if (meta.roi_x) j["roi_x"] = *meta.roi_x;
    if (meta.roi_y) j["roi_y"] = *meta.roi_y;
    if (meta.min_location_fraction)
        j["min_location_fraction"] = *meta.min_location_fraction;
    if (meta.breakup_intensity) j["breakup_intensity"] = *meta.breakup_intensity;
    if (meta.force_include) j["force_include"] = true;
    return j.dump(2) + "\n";
}

RawSeries read_series_csv(const fs::path& path) {
    return parse_series_csv(read_text(path), path.filename().string());
}

SeriesMetadata read_metadata_json(const fs::path& path) {
    return parse_metadata_json(read_text(path), path.filename().string());
}

void write_series(const fs::path& csv_path, const RawSeries& series,
                  const SeriesMetadata& meta) {
    write_text_atomic(csv_path, series_csv(series));
    write_text_atomic(sidecar_path(csv_path), metadata_json(meta));
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
    RunConfig rc;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(
            pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trimmed(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(origin, line_no, "expected key = value");
        const std::string key = trimmed(line.substr(0, eq));
        const std::string value = trimmed(line.substr(eq + 1));
        const auto as_number = [&] { return require_finite(origin, line_no, value); };
        const auto as_int = [&] {
            const double v = require_finite(origin, line_no, value);
            if (v != static_cast<int>(v)) fail(origin, line_no, key + " must be an integer");
            return static_cast<int>(v);
        };
        if (key == "objective") {
            if (value != "trapezoid" && value != "mean")
                fail(origin, line_no, "objective must be trapezoid or mean");
            rc.objective = value;
        } else if (key == "delta_sus") {
            rc.delta_sus = as_number();
        } else if (key == "brighten_thresh") {
            rc.brighten_thresh = as_number();
        } else if (key == "smooth_width") {
            rc.smooth_width = as_int();
        } else if (key == "v_threshold") {
            rc.v_threshold = as_number();
        } else if (key == "b1_threshold") {
            rc.b1_threshold = as_number();
        } else if (key == "seed") {
            std::uint64_t seed = 0;
            const char* b = value.data();
            const auto [p, ec] = std::from_chars(b, b + value.size(), seed);
            if (ec != std::errc{} || p != b + value.size())
                fail(origin, line_no, "seed must be a nonnegative integer");
            rc.seed = seed;
        } else if (key == "jobs") {
            rc.jobs = as_int();
        } else {
            fail(origin, line_no, "unknown key '" + key + "'");
        }
    }
    return rc;
}

std::string config_text(const RunConfig& rc) {
    std::string out;
    out += "objective = " + rc.objective + '\n';
    out += "delta_sus = " + format_number(rc.delta_sus) + '\n';
    out += "brighten_thresh = " + format_number(rc.brighten_thresh) + '\n';
    out += "smooth_width = " + format_number(rc.smooth_width) + '\n';
    out += "v_threshold = " + format_number(rc.v_threshold) + '\n';
    out += "b1_threshold = " + format_number(rc.b1_threshold) + '\n';
    out += "seed = " + std::to_string(rc.seed) + '\n';
    out += "jobs = " + format_number(rc.jobs) + '\n';
    return out;
}

RunConfig read_config(const fs::path& path) {
    return parse_config(read_text(path), path.filename().string());
}

FitConfig make_fit_config(const RunConfig& rc) {
    FitConfig cfg;
    cfg.form = rc.objective == "mean" ? MisfitForm::mean : MisfitForm::trapezoid;
    cfg.delta_sus = rc.delta_sus;
    cfg.seed = rc.seed;
    validate(cfg);
    return cfg;
}

PreprocessConfig make_preprocess_config(const RunConfig& rc) {
    PreprocessConfig cfg;
    cfg.brighten_ratio = rc.brighten_thresh;
    cfg.smooth_width = rc.smooth_width;
    validate(cfg);
    return cfg;
}

MechanismThresholds make_thresholds(const RunConfig& rc) {
    return MechanismThresholds{rc.v_threshold, rc.b1_threshold};
}

ModelFitRecord record_of(const FitResult& fit) {
    ModelFitRecord r;
    r.dim = fit.dim;
    r.nondim = fit.nondim;
    r.residual = fit.residual;
    r.penalized = fit.penalized;
    r.converged = fit.converged;
    r.cross_check_ok = fit.cross_check_ok;
    r.at_lower = fit.at_lower;
    r.at_upper = fit.at_upper;
    r.winning_start = fit.winning_start;
    return r;
}

namespace {

json fit_record_json(const ModelFitRecord& r) {
    json j;
    j["evap_um_per_min"] = r.dim.evap_um_per_min;
    j["strain_rate_per_s"] = r.dim.strain_rate_per_s;
    j["strain_decay_per_s"] = r.dim.strain_decay_per_s;
    j["evap_nondim"] = r.nondim.evap;
    j["strain_rate_nondim"] = r.nondim.strain.rate;
    j["strain_decay_nondim"] = r.nondim.strain.decay;
    j["residual_nondim"] = r.residual;
    j["penalized"] = r.penalized;
    j["converged"] = r.converged;
    j["cross_check_ok"] = r.cross_check_ok;
    j["at_lower"] = r.at_lower;
    j["at_upper"] = r.at_upper;
    j["winning_start"] = r.winning_start;
    return j;
}

ModelFitRecord fit_record_from(const json& j, ModelKind kind) {
    ModelFitRecord r;
    r.dim.evap_um_per_min = j.at("evap_um_per_min").get<double>();
    r.dim.strain_rate_per_s = j.at("strain_rate_per_s").get<double>();
    r.dim.strain_decay_per_s = j.at("strain_decay_per_s").get<double>();
    r.nondim.evap = j.at("evap_nondim").get<double>();
    r.nondim.strain.kind = kind;
    r.nondim.strain.rate = j.at("strain_rate_nondim").get<double>();
    r.nondim.strain.decay = j.at("strain_decay_nondim").get<double>();
    r.residual = j.at("residual_nondim").get<double>();
    r.penalized = j.at("penalized").get<bool>();
    r.converged = j.at("converged").get<bool>();
    r.cross_check_ok = j.at("cross_check_ok").get<bool>();
    r.at_lower = j.at("at_lower").get<std::vector<bool>>();
    r.at_upper = j.at("at_upper").get<std::vector<bool>>();
    r.winning_start = j.at("winning_start").get<std::vector<double>>();
    return r;
}

json summary_json(const InstanceSummary& s) {
    json j;
    j["subject_id"] = s.subject_id;
    j["trial_id"] = s.trial_id;
    j["roi_id"] = s.roi_id;
    j["evap_um_per_min"] = s.evap_um_per_min;
    j["strain_rate_per_s"] = s.strain_rate_per_s;
    j["strain_decay_per_s"] = s.strain_decay_per_s;
    j["osmolarity_nondim"] = s.osmolarity_nondim;
    j["osmolarity_mosm"] = s.osmolarity_mosm;
    j["osmolarity_at_termination"] = s.osmolarity_at_termination;
    j["final_thickness_nondim"] = s.final_thickness_nondim;
    j["thinning_rate_um_per_min"] = s.thinning_rate_um_per_min;
    j["mechanism"] = to_string(s.mechanism);
    j["discomfort"] = s.discomfort;
    j["h0_um"] = s.h0_um;
    j["f0_percent"] = s.f0_percent;
    j["window_s"] = s.window_s;
    if (s.roi_x) j["roi_x"] = *s.roi_x;
    if (s.roi_y) j["roi_y"] = *s.roi_y;
    return j;
}

InstanceSummary summary_from(const json& j) {
    InstanceSummary s;
    s.subject_id = j.at("subject_id").get<std::string>();
    s.trial_id = j.at("trial_id").get<std::string>();
    s.roi_id = j.at("roi_id").get<std::string>();
    s.evap_um_per_min = j.at("evap_um_per_min").get<double>();
    s.strain_rate_per_s = j.at("strain_rate_per_s").get<double>();
    s.strain_decay_per_s = j.at("strain_decay_per_s").get<double>();
    s.osmolarity_nondim = j.at("osmolarity_nondim").get<double>();
    s.osmolarity_mosm = j.at("osmolarity_mosm").get<double>();
    s.osmolarity_at_termination = j.at("osmolarity_at_termination").get<bool>();
    s.final_thickness_nondim = j.at("final_thickness_nondim").get<double>();
    s.thinning_rate_um_per_min = j.at("thinning_rate_um_per_min").get<double>();
    s.mechanism = mechanism_from_string(j.at("mechanism").get<std::string>());
    s.discomfort = j.at("discomfort").get<bool>();
    s.h0_um = j.at("h0_um").get<double>();
    s.f0_percent = j.at("f0_percent").get<double>();
    s.window_s = j.at("window_s").get<double>();
    if (j.contains("roi_x")) s.roi_x = j.at("roi_x").get<double>();
    if (j.contains("roi_y")) s.roi_y = j.at("roi_y").get<double>();
    return s;
}

json config_json(const RunConfig& rc) {
    json j;
    j["objective"] = rc.objective;
    j["delta_sus"] = rc.delta_sus;
    j["brighten_thresh"] = rc.brighten_thresh;
    j["smooth_width"] = rc.smooth_width;
    j["v_threshold"] = rc.v_threshold;
    j["b1_threshold"] = rc.b1_threshold;
    j["seed"] = rc.seed;
    j["jobs"] = rc.jobs;
    return j;
}

RunConfig config_from(const json& j) {
    RunConfig rc;
    rc.objective = j.at("objective").get<std::string>();
    rc.delta_sus = j.at("delta_sus").get<double>();
    rc.brighten_thresh = j.at("brighten_thresh").get<double>();
    rc.smooth_width = j.at("smooth_width").get<int>();
    rc.v_threshold = j.at("v_threshold").get<double>();
    rc.b1_threshold = j.at("b1_threshold").get<double>();
    rc.seed = j.at("seed").get<std::uint64_t>();
    rc.jobs = j.at("jobs").get<int>();
    return rc;
}

} // namespace

std::string report_json(const FitReport& report) {
    json j;
    j["schema_version"] = report.schema_version;
    j["tool_version"] = report.tool_version;
    j["seed"] = report.seed;
    j["subject_id"] = report.meta.subject_id;
    j["trial_id"] = report.meta.trial_id;
    j["roi_id"] = report.meta.roi_id;
    j["metadata"] = parse_json(metadata_json(report.meta), "metadata");
    j["screening"]["accepted"] = report.screening.accepted;
    j["screening"]["reasons"] = report.screening.reasons;
    j["screening"]["forced"] = report.forced;
    j["fitted"] = report.fitted;
    if (report.window_error) j["window_error"] = *report.window_error;
    if (report.fitted) {
        j["window"]["start_s"] = report.window_start_s;
        j["window"]["end_s"] = report.window_end_s;
        j["window"]["duration_s"] = report.scales.window_s;
        j["scales"]["h0_um"] = report.scales.h0_um;
        j["scales"]["window_s"] = report.scales.window_s;
        j["scales"]["f0_nondim"] = report.scales.f0;
        j["groups"]["osmosis_nondim"] = report.groups.osmosis;
        j["groups"]["optical_depth_nondim"] = report.groups.optical_depth;
        j["fits"]["o"] = fit_record_json(report.fit_o);
        j["fits"]["f"] = fit_record_json(report.fit_f);
        j["fits"]["d"] = fit_record_json(report.fit_d);
        j["ordering_verified"] = report.ordering_verified;
        j["diagnostics"] = report.diagnostics;
        j["summary"] = summary_json(report.summary);
    }
    j["config"] = config_json(report.config);
    return j.dump(2) + "\n";
}

FitReport parse_report_json(const std::string& text, const std::string& origin) {
    const json j = parse_json(text, origin);
    FitReport r;
    try {
        r.schema_version = j.at("schema_version").get<int>();
        if (r.schema_version != kSchemaVersion)
            throw ParseError(origin + ": unsupported schema version " +
                             std::to_string(r.schema_version));
        r.tool_version = j.at("tool_version").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.meta = parse_metadata_json(j.at("metadata").dump(), origin);
        r.screening.accepted = j.at("screening").at("accepted").get<bool>();
        r.screening.reasons =
            j.at("screening").at("reasons").get<std::vector<std::string>>();
        r.forced = j.at("screening").at("forced").get<bool>();
        r.fitted = j.at("fitted").get<bool>();
        if (j.contains("window_error"))
            r.window_error = j.at("window_error").get<std::string>();
        if (r.fitted) {
            r.window_start_s = j.at("window").at("start_s").get<double>();
            r.window_end_s = j.at("window").at("end_s").get<double>();
            r.scales.h0_um = j.at("scales").at("h0_um").get<double>();
            r.scales.window_s = j.at("scales").at("window_s").get<double>();
            r.scales.f0 = j.at("scales").at("f0_nondim").get<double>();
            r.groups.osmosis = j.at("groups").at("osmosis_nondim").get<double>();
            r.groups.optical_depth =
                j.at("groups").at("optical_depth_nondim").get<double>();
            r.fit_o = fit_record_from(j.at("fits").at("o"), ModelKind::O);
            r.fit_f = fit_record_from(j.at("fits").at("f"), ModelKind::F);
            r.fit_d = fit_record_from(j.at("fits").at("d"), ModelKind::D);
            r.ordering_verified = j.at("ordering_verified").get<bool>();
            r.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
            r.summary = summary_from(j.at("summary"));
        }
        r.config = config_from(j.at("config"));
    } catch (const json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    return r;
}

FitReport read_report(const fs::path& path) {
    return parse_report_json(read_text(path), path.filename().string());
}

void write_report(const fs::path& path, const FitReport& report) {
    write_text_atomic(path, report_json(report));
}

std::string batch_summary_json(const BatchSummary& summary) {
    json j;
    j["schema_version"] = summary.schema_version;
    j["tool_version"] = summary.tool_version;
    j["config"] = config_json(summary.config);
    j["n_files"] = summary.n_files;
    j["n_fitted"] = summary.n_fitted;
    j["n_screened"] = summary.n_screened;
    j["n_window_failed"] = summary.n_window_failed;
    j["n_errors"] = summary.n_errors;
    j["instances"] = json::array();
    for (const auto& s : summary.instances)
        j["instances"].push_back(summary_json(s));
    return j.dump(2) + "\n";
}

BatchSummary parse_batch_summary_json(const std::string& text,
                                      const std::string& origin) {
    const json j = parse_json(text, origin);
    BatchSummary b;
    try {
        b.schema_version = j.at("schema_version").get<int>();
        if (b.schema_version != kSchemaVersion)
            throw ParseError(origin + ": unsupported schema version " +
                             std::to_string(b.schema_version));
        b.tool_version = j.at("tool_version").get<std::string>();
        b.config = config_from(j.at("config"));
        b.n_files = j.at("n_files").get<int>();
        b.n_fitted = j.at("n_fitted").get<int>();
        b.n_screened = j.at("n_screened").get<int>();
        b.n_window_failed = j.at("n_window_failed").get<int>();
        b.n_errors = j.at("n_errors").get<int>();
        for (const auto& item : j.at("instances"))
            b.instances.push_back(summary_from(item));
    } catch (const json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    return b;
}

BatchSummary read_batch_summary(const fs::path& path) {
    return parse_batch_summary_json(read_text(path), path.filename().string());
}

} // namespace tearfilm
