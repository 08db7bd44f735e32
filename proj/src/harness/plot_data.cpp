// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/harness/plot_data.hpp"

#include "cei/error.hpp"
#include "cei/harness/file_io.hpp"

#include <fmt/format.h>

namespace cei::harness {
namespace {

std::string header(std::string_view table, std::string_view columns) {
    return fmt::format("# cei-plot-data v{} {}\n{}\n", kPlotDataVersion, table, columns);
}

std::string num(double v) { return format_double(v); }

BoxSummary box_from_json(const nlohmann::json& j) {
    BoxSummary b;
    b.count = j.at("count").get<int>();
    b.mean = j.at("mean").get<double>();
    b.min = j.at("min").get<double>();
    b.q1 = j.at("q1").get<double>();
    b.median = j.at("median").get<double>();
    b.q3 = j.at("q3").get<double>();
    b.max = j.at("max").get<double>();
    return b;
}

AlignmentMeasure parse_measure(const std::string& name) {
    for (auto m : kAlignmentMeasures) {
        if (to_string(m) == name) return m;
    }
    throw FormatError("unknown alignment measure '" + name + "'");
}

AlignmentReport alignment_from_json(const nlohmann::json& j) {
    AlignmentReport r;
    r.truthful_count = j.at("counts").at("truthful").get<int>();
    r.hallucinatory_count = j.at("counts").at("hallucinatory").get<int>();
    r.bootstrap_n = j.at("bootstrap_n").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& m : j.at("measures")) {
        MeasureComparison c;
        c.measure = parse_measure(m.at("measure").get<std::string>());
        c.truthful = box_from_json(m.at("truthful"));
        c.hallucinatory = box_from_json(m.at("hallucinatory"));
        c.mean_difference = m.at("mean_difference").get<double>();
        c.ci95_low = m.at("ci95_low").get<double>();
        c.ci95_high = m.at("ci95_high").get<double>();
        r.measures.push_back(c);
    }
    return r;
}

}  // namespace

std::string commitment_curves_csv(const AggregateResult* aggregates) {
    std::string out = header("commitment_curves", "label,layer,mean,std,count");
    if (aggregates == nullptr) return out;
    for (const auto& a : aggregates->aggregates) {
        for (std::size_t l = 0; l < a.mean_curve.size(); ++l) {
            out += fmt::format("{},{},{},{},{}\n", to_string(a.label), l + 1, num(a.mean_curve[l]), num(a.std_curve[l]),
                               a.count);
        }
    }
    return out;
}

std::string mass_histograms_csv(const AggregateResult* aggregates) {
    std::string out = header("mass_histograms", "label,bin,bin_low,bin_high,count");
    if (aggregates == nullptr) return out;
    for (const auto& h : aggregates->histograms) {
        for (int b = 0; b < kHistogramBins; ++b) {
            out += fmt::format("{},{},{},{},{}\n", to_string(h.label), b, num(static_cast<double>(b) / kHistogramBins),
                               num(static_cast<double>(b + 1) / kHistogramBins), h.counts[static_cast<std::size_t>(b)]);
        }
    }
    return out;
}

std::string alignment_box_csv(const AlignmentReport* report) {
    std::string out = header("alignment_box", "measure,label,count,mean,min,q1,median,q3,max");
    if (report == nullptr) return out;
    for (const auto& m : report->measures) {
        for (const auto& [label, b] : {std::pair{TokenLabel::truthful, &m.truthful}, std::pair{TokenLabel::hallucinatory, &m.hallucinatory}}) {
            out += fmt::format("{},{},{},{},{},{},{},{},{}\n", to_string(m.measure), to_string(label), b->count, num(b->mean),
                               num(b->min), num(b->q1), num(b->median), num(b->q3), num(b->max));
        }
    }
    return out;
}

std::string scheduler_curves_csv(std::span<const SchedulerCurveSpec> curves) {
    std::string out = header("scheduler_curves", "curve,alpha_max,beta,mean_mass,half_cosine,linear");
    for (const auto& c : curves) {
        for (int i = 0; i < kSchedulerCurvePoints; ++i) {
            const double m = static_cast<double>(i) / (kSchedulerCurvePoints - 1);
            out += fmt::format("{},{},{},{},{},{}\n", c.name, num(c.alpha_max), num(c.beta), num(m),
                               num(schedule_half_cosine(m, c.alpha_max, c.beta)),
                               num(schedule_linear(m, c.alpha_max, c.beta)));
        }
    }
    return out;
}

std::string sweep_grid_csv(std::span<const SweepCell> cells) {
    std::string out = header("sweep_grid", "alpha_max,beta,chair_s,chair_i,amber_chair,amber_hal,amber_cover");
    for (const auto& c : cells) {
        const auto& r = c.report;
        out += fmt::format("{},{},{},{},{},{},{}\n", num(c.alpha_max), num(c.beta), num(r.chair_s), num(r.chair_i),
                           num(r.amber_chair), num(r.amber_hal), num(r.amber_cover));
    }
    return out;
}

PlotArtifacts collect_artifacts(std::span<const std::filesystem::path> dirs) {
    PlotArtifacts a;
    std::vector<CommitmentProfile> profiles;
    for (const auto& dir : dirs) {
        try {
            if (const auto p = dir / "profiles.json"; std::filesystem::exists(p)) {
                const auto doc = read_json(p);
                for (const auto& row : doc.at("profiles")) profiles.push_back(profile_from_json(row.at("profile")));
            }
            if (const auto p = dir / "alignment_report.json"; std::filesystem::exists(p)) {
                a.alignment = alignment_from_json(read_json(p));
            }
            if (const auto p = dir / "sweep.json"; std::filesystem::exists(p)) {
                const auto doc = read_json(p);
                for (const auto& cell : doc.at("cells")) {
                    SweepCell c;
                    c.alpha_max = cell.at("alpha_max").get<double>();
                    c.beta = cell.at("beta").get<double>();
                    const auto& r = cell.at("report");
                    c.report.chair_s = r.at("chair_s").get<double>();
                    c.report.chair_i = r.at("chair_i").get<double>();
                    c.report.amber_chair = r.at("amber_chair").get<double>();
                    c.report.amber_hal = r.at("amber_hal").get<double>();
                    c.report.amber_cover = r.at("amber_cover").get<double>();
                    a.sweep.push_back(c);
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(dir.string() + ": malformed artifact: " + e.what());
        }
    }
    if (!profiles.empty()) a.commitment = aggregate_profiles(profiles);
    return a;
}

std::vector<std::filesystem::path> emit_plot_data(const PlotArtifacts& artifacts, const std::filesystem::path& output_dir) {
    const AggregateResult* agg = artifacts.commitment ? &*artifacts.commitment : nullptr;
    const AlignmentReport* align = artifacts.alignment ? &*artifacts.alignment : nullptr;
    const std::vector<std::pair<const char*, std::string>> tables = {
        {kCommitmentCurvesFile, commitment_curves_csv(agg)},
        {kMassHistogramsFile, mass_histograms_csv(agg)},
        {kAlignmentBoxFile, alignment_box_csv(align)},
        {kSchedulerCurvesFile, scheduler_curves_csv(artifacts.scheduler_curves)},
        {kSweepGridFile, sweep_grid_csv(artifacts.sweep)},
    };
    std::vector<std::filesystem::path> written;
    for (const auto& [name, text] : tables) {
        const auto path = output_dir / name;
        write_file_atomic(path, text);
        written.push_back(path);
    }
    return written;
}

}  // namespace cei::harness
