#include "copolicy/outcome.hpp"

#include "copolicy/errors.hpp"

namespace copolicy {

std::string_view to_string(ScaleMode mode) { return mode == ScaleMode::unit_mean ? "unit_mean" : "grand_mean"; }

std::optional<ScaleMode> parse_scale_mode(std::string_view s) {
  if (s == "unit_mean") return ScaleMode::unit_mean;
  if (s == "grand_mean") return ScaleMode::grand_mean;
  return std::nullopt;
}

RateEffects true_effect_on_rate(const EffectSpec& spec, double scale) {
  return {spec.pct_primary * scale, spec.pct_secondary * scale};
}

TreatedPanel apply_effects(std::shared_ptr<const Panel> panel, const ExposureMatrix& exposures,
                           const EffectSpec& spec) {
  const auto summary = panel_summary(*panel);
  return apply_effects(std::move(panel), summary, exposures, spec);
}

TreatedPanel apply_effects(std::shared_ptr<const Panel> panel, const PanelSummary& summary,
                           const ExposureMatrix& exposures, const EffectSpec& spec) {
  if (!panel) throw MissingExposure("no panel supplied");
  if (exposures.n_units() != panel->n_units() || exposures.n_years() != panel->n_years()) {
    throw MissingExposure("exposure matrix is " + std::to_string(exposures.n_units()) + "x" +
                          std::to_string(exposures.n_years()) + " but the panel is " +
                          std::to_string(panel->n_units()) + "x" + std::to_string(panel->n_years()));
  }

  const std::size_t n_units = panel->n_units();
  const std::size_t n_years = panel->n_years();
  TreatedPanel out;
  out.y_star.resize(panel->size());
  out.unit_effects.resize(n_units);
  for (std::size_t i = 0; i < n_units; ++i) {
    const double scale = spec.scale_mode == ScaleMode::unit_mean ? summary.unit_means[i] : summary.grand_mean;
    const RateEffects te = true_effect_on_rate(spec, scale);
    out.unit_effects[i] = te;
    for (std::size_t t = 0; t < n_years; ++t) {
      double y = panel->outcome(i, t);
      if (exposures.treated(i)) y += te.te1 * exposures.a1(i, t) + te.te2 * exposures.a2(i, t);
      out.y_star[i * n_years + t] = y;
    }
  }
  out.panel = std::move(panel);
  return out;
}

}  // namespace copolicy
