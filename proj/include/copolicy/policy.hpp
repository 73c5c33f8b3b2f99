#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "copolicy/rng.hpp"

namespace copolicy {

/// Interval [gap_low, gap_high) of years separating the two enactment dates.
///
/// The four standard conditions are C1=[0,1), C2=[3,4), C3=[6,7), C4=[9,10).
/// C0 is the degenerate gap_low == gap_high == 0 case: both policies are
/// enacted at the same instant. Any other gap_low == gap_high is also treated
/// as an exact gap.
struct GapCondition {
  std::string label;
  double gap_low = 0.0;
  double gap_high = 1.0;

  static GapCondition standard(int condition);
  static GapCondition simultaneous();
  /// "C0".."C4"; nullopt for anything else.
  static std::optional<GapCondition> from_label(std::string_view label);

  bool exact() const noexcept { return gap_low == gap_high; }
  double midpoint() const noexcept { return 0.5 * (gap_low + gap_high); }

  bool operator==(const GapCondition&) const = default;
};

/// Throws InvalidConfig unless 0 <= gap_low <= gap_high (finite).
void validate(const GapCondition& gap);

enum class Ordering { random, primary_first };
enum class PhaseIn { instantaneous, linear_3yr };

std::string_view to_string(Ordering ordering);
std::string_view to_string(PhaseIn phase_in);
std::optional<Ordering> parse_ordering(std::string_view s);
std::optional<PhaseIn> parse_phase_in(std::string_view s);

/// Continuous calendar times: 2005.25 is a quarter of the way through 2005.
struct EnactmentPair {
  double t_primary = 0.0;
  double t_secondary = 0.0;
  Ordering ordering = Ordering::random;

  bool operator==(const EnactmentPair&) const = default;
};

struct YearWindow {
  int first_year = 0;
  int last_year = 0;
};

/// k distinct unit indices in [0, n_units), sampled uniformly without
/// replacement and returned in ascending order. Throws KTooLarge when
/// k > n_units and InvalidConfig when k == 0.
std::vector<std::size_t> assign_treated(std::size_t n_units, std::size_t k, Rng& rng);

/// Same draw as the index overload, mapped onto ids.
std::vector<std::string> assign_treated(std::span<const std::string> unit_ids, std::size_t k, Rng& rng);

/// Draws one unit's pair of enactment times.
///
/// The gap is uniform on [gap_low, gap_high) and the earlier date is uniform
/// on [first_year + 2, last_year - gap_high - 1], which leaves at least two
/// unexposed years before the first policy and one full year after the
/// second. Under Ordering::random the primary policy comes first with
/// probability 1/2. Throws InfeasibleWindow if the interval is empty.
EnactmentPair sample_enactments(const GapCondition& gap, Ordering ordering, YearWindow window, Rng& rng);

/// Exposure of one policy per calendar year.
///
/// instantaneous: the fraction of year y at or after `enact_time`.
/// linear_3yr: the average over year y of the ramp clip((tau - enact_time) / 3, 0, 1).
std::vector<double> code_exposure(double enact_time, PhaseIn phase_in, std::span<const int> years);

/// delta_t = a_t - a_{t-1}, with the value before the first year taken as 0.
std::vector<double> change_code(std::span<const double> series);

/// Per unit-year exposures for both policies, level and change coded.
/// Comparison units carry zeros throughout.
class ExposureMatrix {
 public:
  ExposureMatrix(std::size_t n_units, std::size_t n_years);

  std::size_t n_units() const noexcept { return n_units_; }
  std::size_t n_years() const noexcept { return n_years_; }

  double a1(std::size_t unit, std::size_t t) const { return a1_[unit * n_years_ + t]; }
  double a2(std::size_t unit, std::size_t t) const { return a2_[unit * n_years_ + t]; }
  double da1(std::size_t unit, std::size_t t) const { return da1_[unit * n_years_ + t]; }
  double da2(std::size_t unit, std::size_t t) const { return da2_[unit * n_years_ + t]; }

  bool treated(std::size_t unit) const { return treated_[unit]; }
  const std::optional<EnactmentPair>& enactment(std::size_t unit) const { return enactments_[unit]; }
  std::vector<std::size_t> treated_units() const;

  /// Codes both policies for `unit` from its enactment pair.
  void set_treated(std::size_t unit, const EnactmentPair& pair, PhaseIn phase_in, std::span<const int> years);

  /// Direct assignment of level series (change coding is derived). Used for
  /// constructed test designs.
  void set_series(std::size_t unit, std::span<const double> a1, std::span<const double> a2);

 private:
  std::size_t n_units_;
  std::size_t n_years_;
  std::vector<double> a1_, a2_, da1_, da2_;
  std::vector<bool> treated_;
  std::vector<std::optional<EnactmentPair>> enactments_;
};

/// Convenience: treated set + one enactment pair per treated unit, in the
/// order of `treated`.
ExposureMatrix build_exposures(std::size_t n_units, std::span<const int> years, std::span<const std::size_t> treated,
                               std::span<const EnactmentPair> pairs, PhaseIn phase_in);

}  // namespace copolicy
