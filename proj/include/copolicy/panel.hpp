#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace copolicy {

/// One state-year observation. `outcome_rate` is deaths per 100,000 residents,
/// `covariate` the unemployment rate in percent, `population` the analytic weight.
struct UnitYearRow {
  std::string unit_id;
  int year = 0;
  double outcome_rate = 0.0;
  double covariate = 0.0;
  double population = 1.0;

  bool operator==(const UnitYearRow&) const = default;
};

/// Balanced unit x year table, stored unit-major and sorted by (unit_id, year).
///
/// A Panel can only be obtained through `Panel::from_rows`, which enforces
/// balance, uniqueness and value validity; downstream code relies on those
/// guarantees without re-checking. Instances are immutable.
class Panel {
 public:
  /// Sorts, validates and takes ownership of `rows`.
  /// Throws InvalidValue (negative rate, nonpositive population, duplicate
  /// cell, non-finite number) or UnbalancedPanel (missing cells).
  static Panel from_rows(std::vector<UnitYearRow> rows);

  std::size_t n_units() const noexcept { return unit_ids_.size(); }
  std::size_t n_years() const noexcept { return n_years_; }
  int first_year() const noexcept { return first_year_; }
  int last_year() const noexcept { return first_year_ + static_cast<int>(n_years_) - 1; }
  std::size_t size() const noexcept { return rows_.size(); }

  const std::vector<UnitYearRow>& rows() const noexcept { return rows_; }
  std::span<const std::string> unit_ids() const noexcept { return unit_ids_; }

  /// Row for unit index `unit` (0-based, in sorted order) and year offset `t`.
  const UnitYearRow& at(std::size_t unit, std::size_t t) const { return rows_[unit * n_years_ + t]; }
  double outcome(std::size_t unit, std::size_t t) const { return at(unit, t).outcome_rate; }

  /// Years first_year..last_year as integers.
  std::vector<int> years() const;

  /// FNV-1a digest of the canonical CSV rendering; identifies panel content.
  std::uint64_t digest() const;

  bool operator==(const Panel&) const = default;

 private:
  Panel() = default;

  std::vector<UnitYearRow> rows_;
  std::vector<std::string> unit_ids_;
  int first_year_ = 0;
  std::size_t n_years_ = 0;
};

/// Column names used when reading a panel CSV.
struct ColumnSchema {
  std::string unit = "unit";
  std::string year = "year";
  std::string outcome_rate = "outcome_rate";
  std::string covariate = "covariate";
  std::string population = "population";
};

Panel load_panel(const std::filesystem::path& path, const ColumnSchema& schema = {});
Panel read_panel_csv(std::istream& in, const ColumnSchema& schema = {});

/// Writes the canonical `unit,year,outcome_rate,covariate,population` CSV with
/// shortest round-trip number formatting, so load_panel(write_panel(p)) == p.
void write_panel(const Panel& panel, std::ostream& out);
void write_panel(const Panel& panel, const std::filesystem::path& path);

/// Parameters of the synthetic null-condition panel.
///
/// Unit i's outcome in year offset t is
///   max(0, base_rate + level_i + (trend_per_year + slope_i) * t + u_it)
/// with level_i ~ N(0, unit_sd^2), slope_i ~ N(0, unit_trend_sd^2) and u_it a
/// stationary AR(1) with coefficient ar1_coef. The innovation SD of unit i is
/// noise_sd * (pop_i / exp(population_log_mean))^(-noise_pop_exponent), so
/// small units have noisier rates as death counts do. The covariate is
/// i.i.d. normal; population is log-normal and constant per unit.
struct SynthConfig {
  std::size_t n_units = 50;
  std::size_t n_years = 18;
  int first_year = 1999;
  double base_rate = 3.0;
  double trend_per_year = 0.6;
  double unit_sd = 1.5;
  double unit_trend_sd = 0.25;
  double ar1_coef = 0.8;
  double noise_sd = 1.0;
  double noise_pop_exponent = 0.5;
  double covariate_mean = 6.0;
  double covariate_sd = 2.0;
  double population_log_mean = 15.0;
  double population_log_sd = 1.0;
  std::uint64_t seed = 20220601;

  bool operator==(const SynthConfig&) const = default;
};

/// Throws InvalidConfig naming the offending field.
void validate(const SynthConfig& config);

Panel synth_panel(const SynthConfig& config);

struct PanelSummary {
  std::vector<double> unit_means;
  double grand_mean = 0.0;
  /// Sample SD (n - 1 denominator) over all unit-years.
  double outcome_sd = 0.0;
};

PanelSummary panel_summary(const Panel& panel);

}  // namespace copolicy
