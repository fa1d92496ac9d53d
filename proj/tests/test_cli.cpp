// Drives the installed binary as a subprocess: exit codes, file outputs,
// determinism across seeds and worker counts.

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "tearfilm/format.hpp"
#include "tearfilm/io.hpp"

using namespace tearfilm;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output; // stdout + stderr combined
};

RunResult run_tool(const std::string& args) {
    const std::string cmd = std::string(TEARFIT_BIN) + " " + args + " 2>&1";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    for (;;) {
        const std::size_t n = std::fread(buf, 1, sizeof buf, pipe);
        if (n == 0) break;
        out.append(buf, n);
    }
    const int status = ::pclose(pipe);
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.output = out;
    return r;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const char* tag) {
        path = fs::temp_directory_path() /
               (std::string("tearfit_cli_") + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const char* name) const { return (path / name).string(); }
};

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    REQUIRE(out.good());
    out << content;
}

std::string slurp(const fs::path& path) {
    REQUIRE(fs::exists(path));
    return read_text(path);
}

const char* kSidecar =
    R"({"subject_id":"s01","trial_id":"t1","roi_id":"r1","h0_um":3.0,"f0_percent":0.2})";

// 31 samples over 3 s with a 7.5% fall: accepted length, rejected drop.
std::string shallow_series() {
    std::string csv = "t_seconds,intensity\n";
    for (int k = 0; k <= 30; ++k) {
        const double t = 0.1 * k;
        csv += format_number(t) + ',' + format_number(200.0 - 5.0 * t) + '\n';
    }
    return csv;
}

// 15 samples over 2.33 s with a steep fall: passes screening, but the span
// is shorter than the minimum fitting window.
std::string brief_series() {
    std::string csv = "t_seconds,intensity\n";
    for (int k = 0; k < 15; ++k) {
        const double t = k / 6.0;
        csv += format_number(t) + ',' + format_number(200.0 - 60.0 * t) + '\n';
    }
    return csv;
}

int count_lines(const std::string& text) {
    int n = 0;
    for (const char c : text)
        if (c == '\n') ++n;
    return n;
}

} // namespace

TEST_CASE("version and argument errors") {
    CHECK(run_tool("--version").output == "tearfit 0.1.0\n");
    CHECK(run_tool("--version").exit_code == 0);
    CHECK(run_tool("").exit_code != 0);
    CHECK(run_tool("frobnicate").exit_code != 0);
    CHECK(run_tool("fit").exit_code != 0); // missing input
}

TEST_CASE("synth is seed-deterministic") {
    TempDir dir("synth");
    const std::string spec = "synth --v 15 --b1 0.06 --b2 0.5 --window 8 --hz 8 "
                             "--sigma 0.01 ";
    CHECK(run_tool(spec + "--seed 7 --out " + (dir / "a.csv")).exit_code == 0);
    CHECK(run_tool(spec + "--seed 7 --out " + (dir / "b.csv")).exit_code == 0);
    CHECK(run_tool(spec + "--seed 8 --out " + (dir / "c.csv")).exit_code == 0);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(slurp(dir / "a.csv") != slurp(dir / "c.csv"));
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));

    // Sidecar carries ids and scales for the fitting step.
    const SeriesMetadata meta = read_metadata_json(dir.path / "a.json");
    CHECK(meta.h0_um == 3.0);
    CHECK(meta.f0_percent == 0.2);

    CHECK(run_tool("synth --out " + (dir / "x.csv") + " --v -1").exit_code == 1);
    CHECK(run_tool("synth --v 5").exit_code == 1); // no --out
}

TEST_CASE("fit exit codes: fitted, screened, errors") {
    TempDir dir("fit");

    // Fitted series -> exit 0 and a full report.
    REQUIRE(run_tool("synth --v 15 --b1 0.06 --b2 0.5 --window 8 --hz 8 "
                     "--sigma 0.01 --seed 11 --out " + (dir / "good.csv"))
                .exit_code == 0);
    const RunResult good = run_tool("fit " + (dir / "good.csv"));
    CHECK(good.exit_code == 0);
    CHECK(good.output.find("mechanism=mixed") != std::string::npos);
    const FitReport rep = read_report(dir.path / "good.report.json");
    CHECK(rep.fitted);
    CHECK(rep.screening.accepted);
    CHECK(rep.summary.mechanism == Mechanism::mixed);
    CHECK(rep.ordering_verified);
    CHECK(rep.fit_o.residual >= rep.fit_f.residual);
    CHECK(rep.fit_f.residual >= rep.fit_d.residual);

    // Custom output path.
    const std::string alt = dir / "alt.json";
    CHECK(run_tool("fit " + (dir / "good.csv") + " --out " + alt).exit_code == 0);
    CHECK(fs::exists(alt));

    // Screened out -> exit 2, report records the reason.
    write_file(dir.path / "shallow.csv", shallow_series());
    write_file(dir.path / "shallow.json", kSidecar);
    const RunResult screened = run_tool("fit " + (dir / "shallow.csv"));
    CHECK(screened.exit_code == 2);
    CHECK(screened.output.find("insufficient_drop") != std::string::npos);
    const FitReport srep = read_report(dir.path / "shallow.report.json");
    CHECK(!srep.fitted);
    CHECK(!srep.screening.accepted);
    REQUIRE(srep.screening.reasons.size() == 1);
    CHECK(srep.screening.reasons[0] == "insufficient_drop");

    // Accepted but unusably brief -> exit 1, report records the window error.
    write_file(dir.path / "brief.csv", brief_series());
    write_file(dir.path / "brief.json", kSidecar);
    const RunResult brief = run_tool("fit " + (dir / "brief.csv"));
    CHECK(brief.exit_code == 1);
    const FitReport brep = read_report(dir.path / "brief.report.json");
    CHECK(!brep.fitted);
    CHECK(brep.screening.accepted);
    REQUIRE(brep.window_error.has_value());
    CHECK(brep.window_error->find("minimum window") != std::string::npos);

    // Missing sidecar field -> exit 1, message names the field.
    write_file(dir.path / "nofield.csv", shallow_series());
    write_file(dir.path / "nofield.json",
               R"({"subject_id":"s","trial_id":"t","roi_id":"r","f0_percent":0.2})");
    const RunResult nofield = run_tool("fit " + (dir / "nofield.csv"));
    CHECK(nofield.exit_code == 1);
    CHECK(nofield.output.find("missing metadata field: h0_um") != std::string::npos);

    // Missing sidecar entirely, malformed CSV with its line number.
    write_file(dir.path / "orphan.csv", shallow_series());
    CHECK(run_tool("fit " + (dir / "orphan.csv")).exit_code == 1);
    write_file(dir.path / "bad.csv", "t_seconds,intensity\n0,1\n1,zap\n");
    write_file(dir.path / "bad.json", kSidecar);
    const RunResult bad = run_tool("fit " + (dir / "bad.csv"));
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("bad.csv:3:") != std::string::npos);

    CHECK(run_tool("fit " + (dir / "absent.csv")).exit_code == 1);
}

TEST_CASE("batch outputs are independent of worker count") {
    TempDir dir("batch");
    const fs::path in = dir.path / "in";
    fs::create_directories(in);
    REQUIRE(run_tool("synth --planted 1 --seed 5 --out-dir " + (dir / "in"))
                .exit_code == 0);
    // One screened file and one broken file exercise the non-fitted paths.
    write_file(in / "shallow.csv", shallow_series());
    write_file(in / "shallow.json", kSidecar);
    write_file(in / "broken.csv", "t_seconds,intensity\n0,oops\n");
    write_file(in / "broken.json", kSidecar);

    const RunResult r1 =
        run_tool("batch " + (dir / "in") + " --out-dir " + (dir / "out1") + " --jobs 1");
    const RunResult r2 =
        run_tool("batch " + (dir / "in") + " --out-dir " + (dir / "out2") + " --jobs 3");
    CHECK(r1.exit_code == 0);
    CHECK(r2.exit_code == 0);
    CHECK(r1.output.find("4 fitted, 1 screened") != std::string::npos);
    CHECK(r1.output.find("1 errors of 6") != std::string::npos);
    CHECK(r1.output.find("broken.csv: error:") != std::string::npos);

    for (const char* name : {"counts.csv", "scatter.csv", "histograms.csv"})
        CHECK(slurp(dir.path / "out1" / name) == slurp(dir.path / "out2" / name));

    // Reports and the roll-up only differ by the recorded worker count.
    BatchSummary s1 = read_batch_summary(dir.path / "out1" / "summary.json");
    BatchSummary s2 = read_batch_summary(dir.path / "out2" / "summary.json");
    CHECK(s1.config.jobs == 1);
    CHECK(s2.config.jobs == 3);
    CHECK(s1.n_files == 6);
    CHECK(s1.n_fitted == 4);
    CHECK(s1.n_screened == 1);
    CHECK(s1.n_errors == 1);
    s2.config.jobs = s1.config.jobs;
    CHECK(batch_summary_json(s1) == batch_summary_json(s2));

    FitReport f1 = read_report(dir.path / "out1" / "shallow.report.json");
    FitReport f2 = read_report(dir.path / "out2" / "shallow.report.json");
    f2.config.jobs = f1.config.jobs;
    CHECK(report_json(f1) == report_json(f2));
    CHECK(!fs::exists(dir.path / "out1" / "broken.report.json"));

    // Scatter carries one row per fitted instance.
    CHECK(count_lines(slurp(dir.path / "out1" / "scatter.csv")) == 1 + 4);

    // Roll-up artifacts in the input directory are not re-ingested as data.
    const RunResult rerun = run_tool("batch " + (dir / "in"));
    CHECK(rerun.exit_code == 0);
    CHECK(rerun.output.find("of 6 files") != std::string::npos);

    // Empty directory: zero files, still a valid (empty) roll-up, exit 0.
    fs::create_directories(dir.path / "empty");
    const RunResult empty = run_tool("batch " + (dir / "empty"));
    CHECK(empty.exit_code == 0);
    CHECK(count_lines(slurp(dir.path / "empty" / "scatter.csv")) == 1);

    // All files broken -> exit 1.
    fs::create_directories(dir.path / "allbad");
    write_file(dir.path / "allbad" / "x.csv", "nope\n");
    CHECK(run_tool("batch " + (dir / "allbad")).exit_code == 1);

    CHECK(run_tool("batch " + (dir / "missing")).exit_code == 1);
}

TEST_CASE("sweep reclassifies a finished batch") {
    TempDir dir("sweep");
    REQUIRE(run_tool("synth --planted 1 --seed 5 --out-dir " + (dir / "pop"))
                .exit_code == 0);
    REQUIRE(run_tool("batch " + (dir / "pop")).exit_code == 0);

    // Default sweep point = the run's own thresholds, so its counts must
    // match the population table's "all" row.
    CHECK(run_tool("sweep --batch-dir " + (dir / "pop")).exit_code == 0);
    const std::string sweep = slurp(dir.path / "pop" / "sweep.csv");
    CHECK(count_lines(sweep) == 2);
    CHECK(sweep.find("\n2,0.038,") != std::string::npos);
    const std::string counts = slurp(dir.path / "pop" / "counts.csv");
    const std::string all_row = counts.substr(counts.find("\nall,") + 5);
    // all,<n>,<evap>,<flow>,<mixed>,<gtf>,... vs 2,0.038,<evap>,<flow>,<mixed>,<gtf>,<total>
    const std::string sweep_row = sweep.substr(sweep.find("\n2,0.038,") + 9);
    CHECK(all_row.substr(2, 8) == sweep_row.substr(0, 8)); // "1,1,1,1,"

    // A grid produces one row per point; extreme thresholds shift everything
    // into the low/low class.
    CHECK(run_tool("sweep --batch-dir " + (dir / "pop") +
                   " --v-range 1:40:3 --b1-range 0.1:0.5:2 --out " + (dir / "grid.csv"))
              .exit_code == 0);
    const std::string grid = slurp(dir.path / "grid.csv");
    CHECK(count_lines(grid) == 1 + 6);
    CHECK(grid.find("40,0.5,0,0,0,4,4") != std::string::npos);

    CHECK(run_tool("sweep --batch-dir " + (dir / "nowhere")).exit_code == 1);
    CHECK(run_tool("sweep --batch-dir " + (dir / "pop") + " --v-range oops")
              .exit_code == 1);
}

TEST_CASE("report regenerates roll-ups from per-file reports") {
    TempDir dir("report");
    REQUIRE(run_tool("synth --planted 1 --seed 9 --out-dir " + (dir / "pop"))
                .exit_code == 0);
    REQUIRE(run_tool("batch " + (dir / "pop")).exit_code == 0);

    const std::string counts = slurp(dir.path / "pop" / "counts.csv");
    const std::string scatter = slurp(dir.path / "pop" / "scatter.csv");
    const std::string hist = slurp(dir.path / "pop" / "histograms.csv");

    const RunResult regen = run_tool("report --batch-dir " + (dir / "pop") +
                                     " --out-dir " + (dir / "regen"));
    CHECK(regen.exit_code == 0);
    CHECK(regen.output.find("4 fitted of 4") != std::string::npos);
    CHECK(slurp(dir.path / "regen" / "counts.csv") == counts);
    CHECK(slurp(dir.path / "regen" / "scatter.csv") == scatter);
    CHECK(slurp(dir.path / "regen" / "histograms.csv") == hist);

    CHECK(run_tool("report --batch-dir " + (dir / "void")).exit_code == 1);
}

TEST_CASE("config file and flag precedence") {
    TempDir dir("config");
    write_file(dir.path / "run.cfg",
               "objective = mean\nv_threshold = 30\nseed = 123\n");

    REQUIRE(run_tool("synth --v 15 --b1 0.06 --b2 0.5 --window 8 --hz 8 "
                     "--seed 11 --out " + (dir / "s.csv")).exit_code == 0);

    // Config applies: with v_threshold 30 the same series classifies as flow.
    const RunResult cfg = run_tool("fit " + (dir / "s.csv") + " --config " +
                                   (dir / "run.cfg"));
    CHECK(cfg.exit_code == 0);
    CHECK(cfg.output.find("mechanism=flow") != std::string::npos);
    const FitReport rep = read_report(dir.path / "s.report.json");
    CHECK(rep.config.objective == "mean");
    CHECK(rep.config.v_threshold == 30.0);
    CHECK(rep.seed == 123);

    // Explicit flags beat the config file.
    const RunResult flag = run_tool("fit " + (dir / "s.csv") + " --config " +
                                    (dir / "run.cfg") + " --v-threshold 2");
    CHECK(flag.exit_code == 0);
    CHECK(flag.output.find("mechanism=mixed") != std::string::npos);

    // Unknown config keys are rejected with their line number.
    write_file(dir.path / "bad.cfg", "objective = mean\nwat = 1\n");
    const RunResult bad = run_tool("fit " + (dir / "s.csv") + " --config " +
                                   (dir / "bad.cfg"));
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("bad.cfg:2: unknown key 'wat'") != std::string::npos);
}
