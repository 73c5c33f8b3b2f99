#include "cli.hpp"

#include <algorithm>
#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "copolicy/config.hpp"
#include "copolicy/errors.hpp"
#include "copolicy/figures.hpp"
#include "copolicy/panel.hpp"
#include "copolicy/runner.hpp"
#include "copolicy/service.hpp"

namespace copolicy::cli {

namespace {

void print_issues(const InvalidConfig& e, std::ostream& err) {
  err << "error: invalid configuration\n";
  for (const auto& issue : e.issues()) err << "  " << (issue.field.empty() ? "<root>" : issue.field) << ": " << issue.message << '\n';
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

struct RunArgs {
  std::string config;
  std::optional<std::size_t> reps;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
  bool keep_reps = false;
  std::string reps_out;
};

int cmd_run(const RunArgs& a, std::ostream& out) {
  const std::filesystem::path config_path(a.config);
  RunConfig config = parse_run_config(load_config_document(config_path), config_path.parent_path());
  if (a.reps) {
    if (*a.reps < 2) throw InvalidConfig("run.reps", "must be >= 2");
    config.grid.n_reps = *a.reps;
  }
  if (a.seed) config.master_seed = *a.seed;
  if (a.workers) config.workers = *a.workers;
  if (a.out) config.output.results = *a.out;
  if (a.keep_reps) {
    config.output.replications =
        a.reps_out.empty() ? std::filesystem::path(config.output.results).replace_extension(".reps.csv")
                           : std::filesystem::path(a.reps_out);
  }
  if (!config.output.manifest) {
    config.output.manifest = std::filesystem::path(config.output.results).replace_extension(".manifest.json");
  }

  const auto panel = materialize_panel(config.panel);
  validate_against_panel(config, *panel);
  const auto scenarios = expand_grid(config.grid);

  RunContext ctx = make_context(panel, config.master_seed, config.workers);
  ctx.abort_fail_rate = config.abort_fail_rate;
  ctx.retain_cap = config.output.replications ? config.grid.n_reps : 0;
  const auto results = run_scenarios(ctx, scenarios);

  {
    auto f = open_output(config.output.results);
    write_results_csv(results, f);
  }
  if (config.output.replications) {
    auto f = open_output(*config.output.replications);
    write_replications_csv(results, f);
  }
  {
    auto f = open_output(*config.output.manifest);
    f << make_manifest(config, *panel, scenarios.size()).dump(2) << '\n';
  }
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.n_failed;
  out << "wrote " << scenarios.size() << " scenarios x " << config.grid.n_reps << " reps to "
      << config.output.results.string() << " (" << failed << " failed replications)\n";
  return 0;
}

int cmd_figures(const std::string& results_path, const std::string& figure, const std::string& out_dir,
                std::ostream& out) {
  const auto rows = load_results(results_path);
  std::vector<std::string> ids;
  if (figure == "all") {
    for (const char* id : figure_ids()) ids.emplace_back(id);
  } else {
    ids.push_back(figure);
  }
  for (const auto& id : ids) {
    const auto points = build_figure(rows, id);
    for (const auto& path : write_figure_panels(points, out_dir)) out << path.string() << '\n';
  }
  return 0;
}

int cmd_validate(const std::string& path, std::ostream& out) {
  const Panel panel = load_panel(path);
  out << "balanced: " << panel.n_units() << " units × " << panel.n_years() << " years (" << panel.first_year()
      << "-" << panel.last_year() << ", " << panel.size() << " rows)\n";
  return 0;
}

int cmd_synth(const std::string& out_path, const std::optional<std::string>& config_path,
              const std::optional<std::uint64_t>& seed, std::ostream& out) {
  SynthConfig synth;
  if (config_path) {
    const std::filesystem::path p(*config_path);
    const auto config = parse_run_config(load_config_document(p), p.parent_path());
    if (config.panel.kind != PanelSource::Kind::synth) throw InvalidConfig("panel.source", "synth needs a synthetic panel");
    synth = config.panel.synth;
  }
  if (seed) synth.seed = *seed;
  const Panel panel = synth_panel(synth);
  auto f = open_output(out_path);
  write_panel(panel, f);
  out << "wrote " << panel.n_units() << " units x " << panel.n_years() << " years to " << out_path << '\n';
  return 0;
}

ScenarioService* g_service = nullptr;

int cmd_serve(ServiceOptions options, std::ostream& out, std::ostream& err) {
  ScenarioService service(options);
  g_service = &service;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->stop();
  });
  out << "serving on http://" << options.host << ":" << options.port << std::endl;
  const bool ok = service.listen();
  g_service = nullptr;
  if (!ok) {
    err << "error: cannot bind " << options.host << ":" << options.port << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monte Carlo laboratory for co-occurring policy bias", "copolicy"};
  app.set_version_flag("--version", COPOLICY_VERSION);
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario grid from a config file");
  run_cmd->add_option("--config,-c", run_args.config, "TOML or JSON run config")->required();
  run_cmd->add_option("--reps", run_args.reps, "Replications per scenario (overrides run.reps)");
  run_cmd->add_option("--seed", run_args.seed, "Master seed (overrides run.seed)");
  run_cmd->add_option("--workers,-j", run_args.workers, "Worker threads (default $COPOLICY_WORKERS or 1)")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--out,-o", run_args.out, "Results CSV path (overrides output.results)");
  run_cmd->add_flag("--keep-reps", run_args.keep_reps, "Also write every replication record");
  run_cmd->add_option("--reps-out", run_args.reps_out, "Replication CSV path (implies --keep-reps)");

  std::string results_path, figure, out_dir = "figures";
  auto* fig_cmd = app.add_subcommand("figures", "Write tidy per-panel CSVs for a figure");
  fig_cmd->add_option("--results,-r", results_path, "Results CSV from `run`")->required();
  fig_cmd->add_option("--figure,-f", figure, "Figure id: 1, 2, 3, A1, A2 or all")->required();
  fig_cmd->add_option("--out-dir,-o", out_dir, "Output directory");

  std::string validate_path;
  auto* val_cmd = app.add_subcommand("validate", "Check that a panel CSV is balanced and valid");
  val_cmd->add_option("csv", validate_path, "Panel CSV")->required();

  std::string synth_out;
  std::optional<std::string> synth_config;
  std::optional<std::uint64_t> synth_seed;
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic null panel as CSV");
  synth_cmd->add_option("--out,-o", synth_out, "Output CSV")->required();
  synth_cmd->add_option("--config,-c", synth_config, "Config whose [panel.synth] table to use");
  synth_cmd->add_option("--seed", synth_seed, "Panel seed");

  ServiceOptions service;
  service.workers = default_workers();
  std::string cache_dir;
  auto* serve_cmd = app.add_subcommand("serve", "Start the local scenario API");
  serve_cmd->add_option("--port,-p", service.port, "Port")->capture_default_str();
  serve_cmd->add_option("--host", service.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--cors-origin", service.cors_origin, "Allowed browser origin")->capture_default_str();
  serve_cmd->add_option("--cache-dir", cache_dir, "Directory for cached job results");
  serve_cmd->add_option("--workers,-j", service.workers, "Compute threads")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) {
      if (!run_args.reps_out.empty()) run_args.keep_reps = true;
      return cmd_run(run_args, out);
    }
    if (*fig_cmd) return cmd_figures(results_path, figure, out_dir, out);
    if (*val_cmd) return cmd_validate(validate_path, out);
    if (*synth_cmd) return cmd_synth(synth_out, synth_config, synth_seed, out);
    if (*serve_cmd) {
      if (!cache_dir.empty()) service.cache_dir = cache_dir;
      return cmd_serve(service, out, err);
    }
  } catch (const InvalidConfig& e) {
    print_issues(e, err);
    return 2;
  } catch (const MissingCells& e) {
    err << "error: results are missing scenario cells:\n";
    for (const auto& cell : e.cells()) err << "  " << cell << '\n';
    return 1;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace copolicy::cli
