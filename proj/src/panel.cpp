#include "copolicy/panel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "copolicy/errors.hpp"
#include "copolicy/rng.hpp"
#include "text_util.hpp"

namespace copolicy {

namespace {

constexpr std::array<const char*, 50> kStateCodes = {
    "AK", "AL", "AR", "AZ", "CA", "CO", "CT", "DE", "FL", "GA", "HI", "IA", "ID", "IL", "IN", "KS", "KY",
    "LA", "MA", "MD", "ME", "MI", "MN", "MO", "MS", "MT", "NC", "ND", "NE", "NH", "NJ", "NM", "NV", "NY",
    "OH", "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT", "VA", "VT", "WA", "WI", "WV", "WY"};

std::string synthetic_unit_id(std::size_t i, std::size_t n_units) {
  if (n_units <= kStateCodes.size()) return kStateCodes[i];
  std::string id = std::to_string(i + 1);
  return "U" + std::string(id.size() < 4 ? 4 - id.size() : 0, '0') + id;
}

std::string row_label(const UnitYearRow& row) {
  return "unit=" + row.unit_id + ", year=" + std::to_string(row.year);
}

}  // namespace

Panel Panel::from_rows(std::vector<UnitYearRow> rows) {
  if (rows.empty()) throw InvalidValue("panel has no rows");

  for (const auto& row : rows) {
    if (!std::isfinite(row.outcome_rate) || !std::isfinite(row.covariate) || !std::isfinite(row.population)) {
      throw InvalidValue("non-finite value at " + row_label(row));
    }
    if (row.outcome_rate < 0.0) {
      throw InvalidValue("negative outcome_rate " + detail::format_double(row.outcome_rate) + " at " + row_label(row));
    }
    if (row.population <= 0.0) {
      throw InvalidValue("nonpositive population " + detail::format_double(row.population) + " at " + row_label(row));
    }
  }

  std::sort(rows.begin(), rows.end(), [](const UnitYearRow& a, const UnitYearRow& b) {
    return a.unit_id != b.unit_id ? a.unit_id < b.unit_id : a.year < b.year;
  });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].unit_id == rows[i - 1].unit_id && rows[i].year == rows[i - 1].year) {
      throw InvalidValue("duplicate row " + row_label(rows[i]));
    }
  }

  const auto [min_it, max_it] = std::minmax_element(
      rows.begin(), rows.end(), [](const UnitYearRow& a, const UnitYearRow& b) { return a.year < b.year; });
  const int first_year = min_it->year;
  const int last_year = max_it->year;

  std::vector<std::string> unit_ids;
  for (const auto& row : rows) {
    if (unit_ids.empty() || unit_ids.back() != row.unit_id) unit_ids.push_back(row.unit_id);
  }

  const auto n_years = static_cast<std::size_t>(last_year - first_year + 1);
  if (rows.size() != unit_ids.size() * n_years) {
    std::vector<UnbalancedPanel::Cell> missing;
    std::size_t i = 0;
    for (const auto& unit : unit_ids) {
      for (int year = first_year; year <= last_year; ++year) {
        if (i < rows.size() && rows[i].unit_id == unit && rows[i].year == year) {
          ++i;
        } else {
          missing.push_back({unit, year});
        }
      }
    }
    throw UnbalancedPanel(std::move(missing));
  }

  Panel panel;
  panel.rows_ = std::move(rows);
  panel.unit_ids_ = std::move(unit_ids);
  panel.first_year_ = first_year;
  panel.n_years_ = n_years;
  return panel;
}

std::vector<int> Panel::years() const {
  std::vector<int> out(n_years_);
  for (std::size_t t = 0; t < n_years_; ++t) out[t] = first_year_ + static_cast<int>(t);
  return out;
}

std::uint64_t Panel::digest() const {
  std::ostringstream out;
  write_panel(*this, out);
  return detail::fnv1a(out.str());
}

Panel read_panel_csv(std::istream& in, const ColumnSchema& schema) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line).empty()) throw ParseError("empty panel file: missing header");
  // Tolerate a UTF-8 byte-order mark.
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = detail::split_csv_line(line);
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("missing required column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_unit = column(schema.unit);
  const std::size_t c_year = column(schema.year);
  const std::size_t c_rate = column(schema.outcome_rate);
  const std::size_t c_cov = column(schema.covariate);
  const std::size_t c_pop = column(schema.population);

  std::vector<UnitYearRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    }
    auto number = [&](std::size_t c) {
      const auto v = detail::parse_double(fields[c]);
      if (!v) throw ParseError("line " + std::to_string(line_no) + ": column '" + header[c] + "' is not a number");
      return *v;
    };
    UnitYearRow row;
    row.unit_id = fields[c_unit];
    if (row.unit_id.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty unit id");
    const auto year = detail::parse_int(fields[c_year]);
    if (!year || fields[c_year].size() != 4) {
      throw ParseError("line " + std::to_string(line_no) + ": year must be a 4-digit integer");
    }
    row.year = static_cast<int>(*year);
    row.outcome_rate = number(c_rate);
    row.covariate = number(c_cov);
    row.population = number(c_pop);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("panel file has a header but no data rows");
  return Panel::from_rows(std::move(rows));
}

Panel load_panel(const std::filesystem::path& path, const ColumnSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open panel file " + path.string());
  return read_panel_csv(in, schema);
}

void write_panel(const Panel& panel, std::ostream& out) {
  out << "unit,year,outcome_rate,covariate,population\n";
  for (const auto& row : panel.rows()) {
    out << row.unit_id << ',' << row.year << ',' << detail::format_double(row.outcome_rate) << ','
        << detail::format_double(row.covariate) << ',' << detail::format_double(row.population) << '\n';
  }
}

void write_panel(const Panel& panel, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write panel file " + path.string());
  write_panel(panel, out);
}

void validate(const SynthConfig& c) {
  std::vector<FieldIssue> issues;
  if (c.n_units < 2) issues.push_back({"n_units", "must be >= 2"});
  if (c.n_years < 4) issues.push_back({"n_years", "must be >= 4"});
  if (c.first_year < 1000 || c.first_year + static_cast<long long>(c.n_years) - 1 > 9999) {
    issues.push_back({"first_year", "years must stay 4-digit"});
  }
  if (!(c.base_rate > 0.0)) issues.push_back({"base_rate", "must be > 0"});
  if (!std::isfinite(c.trend_per_year)) issues.push_back({"trend_per_year", "must be finite"});
  if (!(c.ar1_coef > -1.0 && c.ar1_coef < 1.0)) issues.push_back({"ar1_coef", "must lie in (-1, 1)"});
  if (!(c.noise_sd >= 0.0)) issues.push_back({"noise_sd", "must be >= 0"});
  if (!(c.noise_pop_exponent >= 0.0 && c.noise_pop_exponent <= 1.0)) {
    issues.push_back({"noise_pop_exponent", "must lie in [0, 1]"});
  }
  if (!(c.unit_sd >= 0.0)) issues.push_back({"unit_sd", "must be >= 0"});
  if (!(c.unit_trend_sd >= 0.0)) issues.push_back({"unit_trend_sd", "must be >= 0"});
  if (!std::isfinite(c.covariate_mean)) issues.push_back({"covariate_mean", "must be finite"});
  if (!(c.covariate_sd >= 0.0)) issues.push_back({"covariate_sd", "must be >= 0"});
  if (!std::isfinite(c.population_log_mean)) issues.push_back({"population_log_mean", "must be finite"});
  if (!(c.population_log_sd >= 0.0)) issues.push_back({"population_log_sd", "must be >= 0"});
  if (!issues.empty()) throw InvalidConfig(std::move(issues));
}

Panel synth_panel(const SynthConfig& c) {
  validate(c);
  Rng rng(mix64(c.seed));
  std::normal_distribution<double> normal(0.0, 1.0);

  const double stationary_factor = 1.0 / std::sqrt(1.0 - c.ar1_coef * c.ar1_coef);
  std::vector<UnitYearRow> rows;
  rows.reserve(c.n_units * c.n_years);
  for (std::size_t i = 0; i < c.n_units; ++i) {
    const std::string id = synthetic_unit_id(i, c.n_units);
    const double level = c.base_rate + c.unit_sd * normal(rng);
    const double slope = c.trend_per_year + c.unit_trend_sd * normal(rng);
    const double population = std::round(std::exp(c.population_log_mean + c.population_log_sd * normal(rng)));
    const double noise_sd =
        c.noise_sd * std::exp(-c.noise_pop_exponent * (std::log(std::max(1.0, population)) - c.population_log_mean));
    double u = stationary_factor * noise_sd * normal(rng);
    for (std::size_t t = 0; t < c.n_years; ++t) {
      if (t > 0) u = c.ar1_coef * u + noise_sd * normal(rng);
      UnitYearRow row;
      row.unit_id = id;
      row.year = c.first_year + static_cast<int>(t);
      row.outcome_rate = std::max(0.0, level + slope * static_cast<double>(t) + u);
      row.covariate = c.covariate_mean + c.covariate_sd * normal(rng);
      row.population = std::max(1.0, population);
      rows.push_back(std::move(row));
    }
  }
  return Panel::from_rows(std::move(rows));
}

PanelSummary panel_summary(const Panel& panel) {
  PanelSummary s;
  const std::size_t n_years = panel.n_years();
  s.unit_means.resize(panel.n_units());
  double total = 0.0;
  for (std::size_t i = 0; i < panel.n_units(); ++i) {
    double unit_total = 0.0;
    for (std::size_t t = 0; t < n_years; ++t) unit_total += panel.outcome(i, t);
    s.unit_means[i] = unit_total / static_cast<double>(n_years);
    total += unit_total;
  }
  const auto n = static_cast<double>(panel.size());
  s.grand_mean = total / n;
  double ss = 0.0;
  for (const auto& row : panel.rows()) {
    const double d = row.outcome_rate - s.grand_mean;
    ss += d * d;
  }
  s.outcome_sd = panel.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return s;
}

}  // namespace copolicy
