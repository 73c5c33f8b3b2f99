#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "copolicy/runner.hpp"

namespace copolicy {

/// One row of a results CSV.
struct ResultRow {
  std::size_t scenario_id = 0;
  double effect1 = 0.0;
  double effect2 = 0.0;
  std::string gap;
  std::size_t k = 0;
  std::string phase_in;
  std::string ordering;
  std::string model;
  std::string spec;
  std::string policy;
  std::size_t n_reps = 0;
  double bias = 0.0;
  std::optional<double> std_bias;
  std::optional<double> rel_bias_pct;
  double var_model = 0.0;
  double var_empirical = 0.0;
  double rmse = 0.0;
  std::optional<double> type1;
  std::optional<double> typeS;
  double coverage = 0.0;
  double fail_rate = 0.0;
  std::uint64_t master_seed = 0;

  /// Value of a metric column by name; nullopt for empty cells.
  std::optional<double> metric(std::string_view name) const;
};

std::vector<ResultRow> read_results_csv(std::istream& in);
std::vector<ResultRow> load_results(const std::filesystem::path& path);

/// In-memory equivalent of write_results_csv followed by read_results_csv.
std::vector<ResultRow> result_rows(std::span<const ScenarioResult> results);

/// Metric columns carried in a results table, in CSV order.
std::span<const char* const> metric_names();

/// Figure ids understood by build_figure: "1", "2", "3", "A1", "A2".
std::span<const char* const> figure_ids();

/// The six metrics drawn as panels.
std::span<const char* const> figure_metrics();

/// Tidy point of a figure panel. `facet` is empty for single-facet figures.
struct FigurePoint {
  std::string figure;
  std::string metric;
  std::string policy;
  std::string facet;
  std::string x;
  std::optional<double> value;
};

/// Figures 1/2 (AR correct/misspecified) and A1/A2 (DID) plot each metric
/// against gap conditions C1-C4 for effects (-10%, -10%), k = 30, random
/// ordering, instantaneous phase-in. Figure 3 plots AR-correct at C1 against
/// the seven non-null effect pairs, faceted by ordering.
/// Throws UnknownFigure, or MissingCells listing every absent scenario cell.
std::vector<FigurePoint> build_figure(std::span<const ResultRow> rows, std::string_view figure);

/// Writes one CSV per metric panel (`figure,metric,policy,facet,x,value`)
/// into `out_dir` as fig<id>_<metric>.csv and returns the paths.
std::vector<std::filesystem::path> write_figure_panels(std::span<const FigurePoint> points,
                                                       const std::filesystem::path& out_dir);

void write_figure_csv(std::span<const FigurePoint> points, std::ostream& out);

}  // namespace copolicy
