#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "copolicy/panel.hpp"
#include "copolicy/runner.hpp"

namespace copolicy {

/// Default worker count: $COPOLICY_WORKERS if set and valid, else 1.
std::size_t default_workers();

struct PanelSource {
  enum class Kind { synth, csv };
  Kind kind = Kind::synth;
  SynthConfig synth;
  std::filesystem::path csv_path;
  ColumnSchema columns;
};

struct OutputPaths {
  std::filesystem::path results = "results.csv";
  /// Per-replication CSV; written only when set.
  std::optional<std::filesystem::path> replications;
  /// Defaults to the results path with a `.manifest.json` suffix.
  std::optional<std::filesystem::path> manifest;
};

/// Everything a run needs. Mirrors the config document:
///
///   [panel]   source = "synth" | "csv", path, [panel.columns], [panel.synth]
///   [grid]    effects, gaps, n_treated, phase_in, ordering, model, specification
///   [run]     reps, seed, workers, scale_mode, weighting, se_type, alpha,
///             retain_cap, abort_fail_rate
///   [output]  results, replications, manifest
///
/// Grid factors accept a single value or a list; omitted factors take the
/// full factorial design.
struct RunConfig {
  PanelSource panel;
  GridSpec grid = GridSpec::full_design();
  std::uint64_t master_seed = 42;
  std::size_t workers = default_workers();
  std::size_t retain_cap = 5000;
  double abort_fail_rate = 0.05;
  OutputPaths output;
};

/// Reads a TOML (`.toml`) or JSON (anything else) config file into a JSON
/// document. Throws ParseError on syntax errors.
nlohmann::json load_config_document(const std::filesystem::path& path);
nlohmann::json parse_toml_document(std::string_view text, std::string_view source_name = "config");

/// Schema validation. Unknown keys and bad values are reported together as
/// InvalidConfig field issues using dotted paths such as `grid.n_treated`.
/// A relative panel path is resolved against `base_dir` when given; output
/// paths are left relative to the working directory.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

/// Canonical JSON of the effective configuration (what the run actually used).
nlohmann::json to_json(const RunConfig& config);

std::shared_ptr<const Panel> materialize_panel(const PanelSource& source);

/// Checks every expanded scenario against the panel (e.g. n_treated against
/// the unit count) and reports issues as `grid.<field>`.
void validate_against_panel(const RunConfig& config, const Panel& panel);

/// Manifest written next to every results file.
nlohmann::json make_manifest(const RunConfig& config, const Panel& panel, std::size_t n_scenarios);

}  // namespace copolicy
