#include "copolicy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "copolicy/errors.hpp"

namespace copolicy {

GapCondition GapCondition::standard(int condition) {
  switch (condition) {
    case 1:
      return {"C1", 0.0, 1.0};
    case 2:
      return {"C2", 3.0, 4.0};
    case 3:
      return {"C3", 6.0, 7.0};
    case 4:
      return {"C4", 9.0, 10.0};
    default:
      throw InvalidConfig("gap", "standard gap conditions are C1..C4");
  }
}

GapCondition GapCondition::simultaneous() { return {"C0", 0.0, 0.0}; }

std::optional<GapCondition> GapCondition::from_label(std::string_view label) {
  if (label == "C0") return simultaneous();
  if (label.size() == 2 && label[0] == 'C' && label[1] >= '1' && label[1] <= '4') return standard(label[1] - '0');
  return std::nullopt;
}

void validate(const GapCondition& gap) {
  if (!std::isfinite(gap.gap_low) || !std::isfinite(gap.gap_high) || gap.gap_low < 0.0 || gap.gap_high < gap.gap_low) {
    throw InvalidConfig("gap", "require 0 <= gap_low <= gap_high");
  }
}

std::string_view to_string(Ordering ordering) {
  return ordering == Ordering::random ? "random" : "primary_first";
}

std::string_view to_string(PhaseIn phase_in) {
  return phase_in == PhaseIn::instantaneous ? "instantaneous" : "linear_3yr";
}

std::optional<Ordering> parse_ordering(std::string_view s) {
  if (s == "random") return Ordering::random;
  if (s == "primary_first") return Ordering::primary_first;
  return std::nullopt;
}

std::optional<PhaseIn> parse_phase_in(std::string_view s) {
  if (s == "instantaneous") return PhaseIn::instantaneous;
  if (s == "linear_3yr") return PhaseIn::linear_3yr;
  return std::nullopt;
}

std::vector<std::size_t> assign_treated(std::size_t n_units, std::size_t k, Rng& rng) {
  if (k == 0) throw InvalidConfig("n_treated", "must be >= 1");
  if (k > n_units) {
    throw KTooLarge("cannot treat " + std::to_string(k) + " of " + std::to_string(n_units) + " units");
  }
  std::vector<std::size_t> pool(n_units);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n_units - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<std::string> assign_treated(std::span<const std::string> unit_ids, std::size_t k, Rng& rng) {
  const auto idx = assign_treated(unit_ids.size(), k, rng);
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(unit_ids[i]);
  return out;
}

EnactmentPair sample_enactments(const GapCondition& gap, Ordering ordering, YearWindow window, Rng& rng) {
  validate(gap);
  const double lo = window.first_year + 2.0;
  const double hi = window.last_year - gap.gap_high - 1.0;
  if (!(hi > lo)) {
    throw InfeasibleWindow("years " + std::to_string(window.first_year) + "-" + std::to_string(window.last_year) +
                           " are too short for gap condition " + gap.label);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double width = gap.gap_high - gap.gap_low;
  const double g = gap.gap_low + width * unit(rng);
  const double earlier = lo + (hi - lo) * unit(rng);
  const double later = earlier + g;

  bool primary_first = true;
  if (ordering == Ordering::random) primary_first = unit(rng) < 0.5;

  EnactmentPair pair;
  pair.ordering = ordering;
  pair.t_primary = primary_first ? earlier : later;
  pair.t_secondary = primary_first ? later : earlier;
  return pair;
}

namespace {

// Antiderivative of the 3-year ramp, G(s) = integral of clip(x / 3, 0, 1) over (-inf, s].
double ramp_integral(double s) {
  if (s <= 0.0) return 0.0;
  if (s <= 3.0) return s * s / 6.0;
  return 1.5 + (s - 3.0);
}

}  // namespace

std::vector<double> code_exposure(double enact_time, PhaseIn phase_in, std::span<const int> years) {
  std::vector<double> out(years.size());
  for (std::size_t t = 0; t < years.size(); ++t) {
    const double start = static_cast<double>(years[t]);
    if (phase_in == PhaseIn::instantaneous) {
      out[t] = std::clamp(start + 1.0 - enact_time, 0.0, 1.0);
    } else {
      const double v = ramp_integral(start + 1.0 - enact_time) - ramp_integral(start - enact_time);
      out[t] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

std::vector<double> change_code(std::span<const double> series) {
  std::vector<double> out(series.size());
  double prev = 0.0;
  for (std::size_t t = 0; t < series.size(); ++t) {
    out[t] = series[t] - prev;
    prev = series[t];
  }
  return out;
}

ExposureMatrix::ExposureMatrix(std::size_t n_units, std::size_t n_years)
    : n_units_(n_units),
      n_years_(n_years),
      a1_(n_units * n_years, 0.0),
      a2_(n_units * n_years, 0.0),
      da1_(n_units * n_years, 0.0),
      da2_(n_units * n_years, 0.0),
      treated_(n_units, false),
      enactments_(n_units) {}

std::vector<std::size_t> ExposureMatrix::treated_units() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_units_; ++i) {
    if (treated_[i]) out.push_back(i);
  }
  return out;
}

void ExposureMatrix::set_treated(std::size_t unit, const EnactmentPair& pair, PhaseIn phase_in,
                                 std::span<const int> years) {
  if (years.size() != n_years_) throw MissingExposure("year span does not match exposure matrix");
  const auto a1 = code_exposure(pair.t_primary, phase_in, years);
  const auto a2 = code_exposure(pair.t_secondary, phase_in, years);
  set_series(unit, a1, a2);
  enactments_[unit] = pair;
}

void ExposureMatrix::set_series(std::size_t unit, std::span<const double> a1, std::span<const double> a2) {
  if (unit >= n_units_) throw MissingExposure("unit index out of range");
  if (a1.size() != n_years_ || a2.size() != n_years_) throw MissingExposure("series length does not match years");
  const auto d1 = change_code(a1);
  const auto d2 = change_code(a2);
  const std::size_t base = unit * n_years_;
  std::copy(a1.begin(), a1.end(), a1_.begin() + static_cast<std::ptrdiff_t>(base));
  std::copy(a2.begin(), a2.end(), a2_.begin() + static_cast<std::ptrdiff_t>(base));
  std::copy(d1.begin(), d1.end(), da1_.begin() + static_cast<std::ptrdiff_t>(base));
  std::copy(d2.begin(), d2.end(), da2_.begin() + static_cast<std::ptrdiff_t>(base));
  treated_[unit] = true;
}

ExposureMatrix build_exposures(std::size_t n_units, std::span<const int> years, std::span<const std::size_t> treated,
                               std::span<const EnactmentPair> pairs, PhaseIn phase_in) {
  if (treated.size() != pairs.size()) throw MissingExposure("one enactment pair is required per treated unit");
  ExposureMatrix m(n_units, years.size());
  for (std::size_t j = 0; j < treated.size(); ++j) m.set_treated(treated[j], pairs[j], phase_in, years);
  return m;
}

}  // namespace copolicy
