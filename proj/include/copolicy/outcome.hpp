#pragma once

#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "copolicy/panel.hpp"
#include "copolicy/policy.hpp"

namespace copolicy {

/// What a percentage effect is a percentage of.
enum class ScaleMode {
  unit_mean,   ///< the treated unit's own mean outcome over the panel
  grand_mean,  ///< the mean outcome over all unit-years
};

std::string_view to_string(ScaleMode mode);
std::optional<ScaleMode> parse_scale_mode(std::string_view s);

/// Policy effects as proportions of the scale, e.g. -0.10 for a 10% reduction.
struct EffectSpec {
  double pct_primary = 0.0;
  double pct_secondary = 0.0;
  ScaleMode scale_mode = ScaleMode::grand_mean;

  bool operator==(const EffectSpec&) const = default;
};

struct RateEffects {
  double te1 = 0.0;
  double te2 = 0.0;
};

/// te_k = pct_k * scale.
RateEffects true_effect_on_rate(const EffectSpec& spec, double scale);

/// Null panel plus the treated outcome y* for every unit-year (unit-major,
/// same layout as the panel) and each unit's rate-scale effects.
struct TreatedPanel {
  std::shared_ptr<const Panel> panel;
  std::vector<double> y_star;
  std::vector<RateEffects> unit_effects;

  double y(std::size_t unit, std::size_t t) const { return y_star[unit * panel->n_years() + t]; }
};

/// y*_it = Y_it + te1_i * A1_it + te2_i * A2_it. Values are not truncated at
/// zero. Throws MissingExposure if the exposure matrix does not cover the panel.
TreatedPanel apply_effects(std::shared_ptr<const Panel> panel, const ExposureMatrix& exposures,
                           const EffectSpec& spec);

/// Same, with a precomputed summary of `panel` (avoids recomputing means in
/// replication loops).
TreatedPanel apply_effects(std::shared_ptr<const Panel> panel, const PanelSummary& summary,
                           const ExposureMatrix& exposures, const EffectSpec& spec);

}  // namespace copolicy
