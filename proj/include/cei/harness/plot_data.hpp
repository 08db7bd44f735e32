// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cei/align.hpp"
#include "cei/halmetrics.hpp"
#include "cei/intervene.hpp"
#include "cei/lens.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cei::harness {

inline constexpr int kPlotDataVersion = 1;
inline constexpr int kSchedulerCurvePoints = 101;

struct SchedulerCurveSpec {
    std::string name;
    double alpha_max = 0.0;
    double beta = 1.0;
};

struct SweepCell {
    double alpha_max = 0.0;
    double beta = 1.0;
    halmetrics::MetricReport report;
};

struct PlotArtifacts {
    std::optional<AggregateResult> commitment;
    std::optional<AlignmentReport> alignment;
    std::vector<SchedulerCurveSpec> scheduler_curves;
    std::vector<SweepCell> sweep;
};

/// Every table starts with "# cei-plot-data v<version> <table>" and a column
/// header line; rows follow in a fixed order.
std::string commitment_curves_csv(const AggregateResult* aggregates);
std::string mass_histograms_csv(const AggregateResult* aggregates);
std::string alignment_box_csv(const AlignmentReport* report);
std::string scheduler_curves_csv(std::span<const SchedulerCurveSpec> curves);
std::string sweep_grid_csv(std::span<const SweepCell> cells);

/// Writes all five tables into `output_dir`; missing artifacts give
/// header-only files. Returns the written paths.
std::vector<std::filesystem::path> emit_plot_data(const PlotArtifacts& artifacts, const std::filesystem::path& output_dir);

/// Reads the artifacts earlier runs left in `dirs`: profiles.json,
/// alignment_report.json and sweep.json. Missing files are skipped.
PlotArtifacts collect_artifacts(std::span<const std::filesystem::path> dirs);

inline constexpr const char* kCommitmentCurvesFile = "commitment_curves.csv";
inline constexpr const char* kMassHistogramsFile = "mass_histograms.csv";
inline constexpr const char* kAlignmentBoxFile = "alignment_box.csv";
inline constexpr const char* kSchedulerCurvesFile = "scheduler_curves.csv";
inline constexpr const char* kSweepGridFile = "sweep_grid.csv";

}  // namespace cei::harness
