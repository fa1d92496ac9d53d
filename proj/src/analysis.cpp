#include "tearfilm/analysis.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

#include "tearfilm/format.hpp"

namespace tearfilm {

std::string to_string(Mechanism m) {
    switch (m) {
        case Mechanism::evap: return "evap";
        case Mechanism::flow: return "flow";
        case Mechanism::mixed: return "mixed";
        case Mechanism::gtf: return "gtf";
    }
    throw std::logic_error("unreachable mechanism");
}

Mechanism mechanism_from_string(const std::string& name) {
    if (name == "evap") return Mechanism::evap;
    if (name == "flow") return Mechanism::flow;
    if (name == "mixed") return Mechanism::mixed;
    if (name == "gtf") return Mechanism::gtf;
    throw std::invalid_argument("unknown mechanism: " + name);
}

Mechanism classify(double evap_um_per_min, double flow_per_s,
                   const MechanismThresholds& thr) {
    if (!(thr.evap_um_per_min > 0.0))
        throw std::invalid_argument("classify: evaporation threshold must be positive");
    const bool high_evap = evap_um_per_min >= thr.evap_um_per_min;
    const bool high_flow = flow_per_s >= thr.flow_per_s;
    if (high_evap) return high_flow ? Mechanism::mixed : Mechanism::evap;
    return high_flow ? Mechanism::flow : Mechanism::gtf;
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double median_flow_threshold(const std::vector<double>& flow_rates_per_s) {
    return median(flow_rates_per_s);
}

FinalOsmolarity final_osmolarity(const FitResult& fit,
                                 const PhysicalConstants& pc) {
    if (fit.trajectory.h.empty())
        throw std::invalid_argument("final_osmolarity: empty trajectory");
    FinalOsmolarity out;
    out.nondim = fit.trajectory.m.back() / fit.trajectory.h.back();
    out.mosm = out.nondim * pc.isotonic_mosm;
    out.at_termination = fit.trajectory.termination != Termination::none;
    return out;
}

double mean_thinning_rate(const FitResult& fit, const TrialScales& scales) {
    if (fit.trajectory.h.empty())
        throw std::invalid_argument("mean_thinning_rate: empty trajectory");
    const double h_end = fit.trajectory.h.back();
    return scales.h0_um * (1.0 - h_end) / scales.window_s * 60.0;
}

InstanceSummary summarize(const HierarchyResult& hr, const SeriesMetadata& meta,
                          const TrialScales& scales,
                          const MechanismThresholds& thr,
                          const PhysicalConstants& pc) {
    InstanceSummary s;
    s.subject_id = meta.subject_id;
    s.trial_id = meta.trial_id;
    s.roi_id = meta.roi_id;
    s.evap_um_per_min = hr.d.dim.evap_um_per_min;
    s.strain_rate_per_s = hr.d.dim.strain_rate_per_s;
    s.strain_decay_per_s = hr.d.dim.strain_decay_per_s;
    const auto osm = final_osmolarity(hr.d, pc);
    s.osmolarity_nondim = osm.nondim;
    s.osmolarity_mosm = osm.mosm;
    s.osmolarity_at_termination = osm.at_termination;
    s.final_thickness_nondim = hr.d.trajectory.h.back();
    s.thinning_rate_um_per_min = mean_thinning_rate(hr.d, scales);
    s.mechanism = classify(s.evap_um_per_min, s.strain_rate_per_s, thr);
    s.discomfort = s.osmolarity_mosm > kDiscomfortMosm;
    s.h0_um = scales.h0_um;
    s.f0_percent = scales.f0 * pc.critical_conc_percent;
    s.window_s = scales.window_s;
    s.roi_x = meta.roi_x;
    s.roi_y = meta.roi_y;
    return s;
}

void MechanismCounts::add(Mechanism m) {
    switch (m) {
        case Mechanism::evap: ++evap; break;
        case Mechanism::flow: ++flow; break;
        case Mechanism::mixed: ++mixed; break;
        case Mechanism::gtf: ++gtf; break;
    }
}

PopulationSummary tabulate(const std::vector<InstanceSummary>& instances,
                           int min_subject_instances) {
    PopulationSummary out;
    out.min_subject_instances = min_subject_instances;
    for (const auto& inst : instances) {
        out.overall.add(inst.mechanism);
        auto it = std::find_if(out.by_subject.begin(), out.by_subject.end(),
                               [&](const SubjectCounts& sc) {
                                   return sc.subject_id == inst.subject_id;
                               });
        if (it == out.by_subject.end()) {
            out.by_subject.push_back({inst.subject_id, {}, false});
            it = out.by_subject.end() - 1;
        }
        it->counts.add(inst.mechanism);
    }
    for (auto& sc : out.by_subject)
        sc.excluded = sc.counts.total() < min_subject_instances;
    std::sort(out.by_subject.begin(), out.by_subject.end(),
              [](const SubjectCounts& a, const SubjectCounts& b) {
                  return a.subject_id < b.subject_id;
              });
    return out;
}

Histogram histogram(const std::vector<double>& values, int bins) {
    if (bins <= 0) throw std::invalid_argument("histogram: bins must be positive");
    Histogram h;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    if (values.empty()) return h;
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    h.lo = *mn;
    h.hi = (*mx > *mn) ? *mx : *mn + 1.0;
    const double width = (h.hi - h.lo) / bins;
    for (double v : values) {
        auto idx = static_cast<long>((v - h.lo) / width);
        if (idx < 0) idx = 0;
        if (idx >= bins) idx = bins - 1;  // the top edge belongs to the last bin
        ++h.counts[static_cast<std::size_t>(idx)];
    }
    return h;
}

namespace {

void sort_instances(std::vector<InstanceSummary>& instances) {
    std::sort(instances.begin(), instances.end(),
              [](const InstanceSummary& a, const InstanceSummary& b) {
                  return std::tie(a.subject_id, a.trial_id, a.roi_id) <
                         std::tie(b.subject_id, b.trial_id, b.roi_id);
              });
}

void append_optional(std::string& row, const std::optional<double>& v) {
    row += ',';
    if (v) row += format_number(*v);
}

} // namespace

std::string scatter_csv(std::vector<InstanceSummary> instances) {
    sort_instances(instances);
    std::string out =
        "subject_id,trial_id,roi_id,evap_um_per_min,strain_rate_per_s,"
        "strain_decay_per_s,osmolarity_nondim,osmolarity_mosm,"
        "osmolarity_at_termination,final_thickness_nondim,"
        "thinning_rate_um_per_min,mechanism,discomfort,h0_um,f0_percent,"
        "window_s,roi_x,roi_y\n";
    for (const auto& s : instances) {
        out += s.subject_id + ',' + s.trial_id + ',' + s.roi_id + ',';
        out += format_number(s.evap_um_per_min) + ',';
        out += format_number(s.strain_rate_per_s) + ',';
        out += format_number(s.strain_decay_per_s) + ',';
        out += format_number(s.osmolarity_nondim) + ',';
        out += format_number(s.osmolarity_mosm) + ',';
        out += s.osmolarity_at_termination ? "1," : "0,";
        out += format_number(s.final_thickness_nondim) + ',';
        out += format_number(s.thinning_rate_um_per_min) + ',';
        out += to_string(s.mechanism) + ',';
        out += s.discomfort ? "1," : "0,";
        out += format_number(s.h0_um) + ',';
        out += format_number(s.f0_percent) + ',';
        out += format_number(s.window_s);
        append_optional(out, s.roi_x);
        append_optional(out, s.roi_y);
        out += '\n';
    }
    return out;
}

std::string histogram_csv(const std::vector<InstanceSummary>& instances,
                          int bins) {
    struct Field {
        const char* name;
        double (*get)(const InstanceSummary&);
    };
    static const Field fields[] = {
        {"evap_um_per_min", [](const InstanceSummary& s) { return s.evap_um_per_min; }},
        {"strain_rate_per_s", [](const InstanceSummary& s) { return s.strain_rate_per_s; }},
        {"osmolarity_mosm", [](const InstanceSummary& s) { return s.osmolarity_mosm; }},
        {"h0_um", [](const InstanceSummary& s) { return s.h0_um; }},
        {"f0_percent", [](const InstanceSummary& s) { return s.f0_percent; }},
        {"thinning_rate_um_per_min",
         [](const InstanceSummary& s) { return s.thinning_rate_um_per_min; }},
    };
    std::string out = "field,bin,lo_edge,hi_edge,count\n";
    for (const auto& field : fields) {
        std::vector<double> values;
        values.reserve(instances.size());
        for (const auto& s : instances) values.push_back(field.get(s));
        const Histogram h = histogram(values, bins);
        const double width = (h.hi - h.lo) / bins;
        for (int b = 0; b < bins; ++b) {
            out += std::string(field.name) + ',' + format_number(b) + ',';
            out += format_number(h.lo + b * width) + ',';
            out += format_number(b + 1 == bins ? h.hi : h.lo + (b + 1) * width) + ',';
            out += format_number(h.counts[static_cast<std::size_t>(b)]) + '\n';
        }
    }
    return out;
}

std::string counts_csv(const PopulationSummary& summary) {
    std::string out = "subject_id,n_instances,n_evap,n_flow,n_mixed,n_gtf,excluded\n";
    const auto row = [&out](const std::string& id, const MechanismCounts& c,
                            bool excluded) {
        out += id + ',' + format_number(c.total()) + ',' + format_number(c.evap) +
               ',' + format_number(c.flow) + ',' + format_number(c.mixed) + ',' +
               format_number(c.gtf) + ',' + (excluded ? "1" : "0") + '\n';
    };
    for (const auto& sc : summary.by_subject)
        row(sc.subject_id, sc.counts, sc.excluded);
    row("all", summary.overall, false);
    return out;
}

} // namespace tearfilm
