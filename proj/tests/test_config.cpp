#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include "copolicy/config.hpp"
#include "copolicy/errors.hpp"
#include "support.hpp"

using namespace copolicy;
using nlohmann::json;

namespace {

RunConfig parse_toml(std::string_view text) { return parse_run_config(parse_toml_document(text)); }

std::vector<FieldIssue> issues_of(std::string_view text) {
  try {
    parse_toml(text);
  } catch (const InvalidConfig& e) {
    return e.issues();
  }
  return {};
}

bool has_field(const std::vector<FieldIssue>& issues, std::string_view field) {
  return std::any_of(issues.begin(), issues.end(), [&](const FieldIssue& i) { return i.field == field; });
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("empty document gives the full default design") {
    const auto c = parse_run_config(json::object());
    CHECK(c.panel.kind == PanelSource::Kind::synth);
    CHECK(c.grid == GridSpec::full_design());
    CHECK(c.master_seed == 42);
    CHECK(c.grid.n_reps == 5000);
    CHECK(c.output.results == "results.csv");
    CHECK_FALSE(c.output.replications);
  }

  TEST_CASE("TOML with scalar and list factors") {
    const auto c = parse_toml(R"(
[grid]
effects = [[0.0, 0.0], [-0.1, -0.2]]
gaps = ["C1", "C0", { low = 1.5, high = 2.5 }, { label = "wide", low = 0, high = 9 }]
n_treated = 12
phase_in = ["instantaneous", "linear_3yr"]
ordering = "primary_first"
model = "DID"
specification = ["misspecified"]

[run]
reps = 300
seed = 7
workers = 3
se_type = "iid"
weighting = "unweighted"
alpha = 0.1
abort_fail_rate = 0.2

[output]
results = "out/r.csv"
replications = "out/reps.csv"
)");
    CHECK(c.grid.effects == std::vector<std::pair<double, double>>{{0.0, 0.0}, {-0.1, -0.2}});
    REQUIRE(c.grid.gaps.size() == 4);
    CHECK(c.grid.gaps[0] == GapCondition::standard(1));
    CHECK(c.grid.gaps[1].exact());
    CHECK(c.grid.gaps[2].label == "1.5-2.5");
    CHECK(c.grid.gaps[2].gap_low == 1.5);
    CHECK(c.grid.gaps[3].label == "wide");
    CHECK(c.grid.n_treated == std::vector<std::size_t>{12});
    CHECK(c.grid.phase_ins.size() == 2);
    CHECK(c.grid.orderings == std::vector<Ordering>{Ordering::primary_first});
    CHECK(c.grid.models == std::vector<ModelClass>{ModelClass::did});
    CHECK(c.grid.specifications == std::vector<Specification>{Specification::misspecified});
    CHECK(c.grid.n_reps == 300);
    CHECK(c.grid.se_type == SeType::iid);
    CHECK(c.grid.weighting == Weighting::unweighted);
    CHECK(c.grid.alpha == 0.1);
    CHECK(c.master_seed == 7);
    CHECK(c.workers == 3);
    CHECK(c.abort_fail_rate == 0.2);
    CHECK(*c.output.replications == "out/reps.csv");
    CHECK(expand_grid(c.grid).size() == 2 * 4 * 2);
  }

  TEST_CASE("a bare effect pair is one cell") {
    CHECK(parse_toml("[grid]\neffects = [-0.1, -0.1]\n").grid.effects.size() == 1);
  }

  TEST_CASE("unknown keys are rejected with dotted paths") {
    const auto issues = issues_of("[grid]\nbogus = 1\n[run]\nrepz = 3\n[extra]\n");
    CHECK(has_field(issues, "grid.bogus"));
    CHECK(has_field(issues, "run.repz"));
    CHECK(has_field(issues, "extra"));
  }

  TEST_CASE("bad values are all reported together") {
    const auto issues = issues_of(R"(
[grid]
gaps = ["C9"]
ordering = "sideways"
n_treated = [0, 5]
[run]
reps = 1
alpha = 1.5
abort_fail_rate = -0.1
seed = "abc"
)");
    for (std::string f : {"grid.gaps", "grid.ordering", "grid.n_treated", "run.reps", "run.alpha",
                          "run.abort_fail_rate", "run.seed"}) {
      INFO(f);
      CHECK(has_field(issues, f));
    }
  }

  TEST_CASE("custom gap validation") {
    CHECK(has_field(issues_of("[grid]\ngaps = [{ low = 3, high = 2 }]\n"), "grid.gaps"));
    CHECK(has_field(issues_of("[grid]\ngaps = [{ low = 3 }]\n"), "grid.gaps"));
    CHECK(has_field(issues_of("[grid]\ngaps = [{ label = \"a,b\", low = 1, high = 2 }]\n"), "grid.gaps.label"));
  }

  TEST_CASE("panel section") {
    const auto c = parse_run_config(parse_toml_document("[panel]\nsource = \"csv\"\npath = \"data/p.csv\"\n"
                                                        "[panel.columns]\nunit = \"state\"\n"),
                                    "/base");
    CHECK(c.panel.kind == PanelSource::Kind::csv);
    CHECK(c.panel.csv_path == std::filesystem::path("/base/data/p.csv"));
    CHECK(c.panel.columns.unit == "state");
    CHECK(c.panel.columns.year == "year");

    CHECK(has_field(issues_of("[panel]\nsource = \"csv\"\n"), "panel.path"));
    CHECK(has_field(issues_of("[panel]\nsource = \"sql\"\n"), "panel.source"));
    CHECK(has_field(issues_of("[panel.synth]\nar1_coef = 1.2\n"), "panel.synth.ar1_coef"));
    const auto s = parse_toml("[panel.synth]\nn_units = 10\nseed = 3\n");
    CHECK(s.panel.synth.n_units == 10);
    CHECK(s.panel.synth.seed == 3);
  }

  TEST_CASE("syntax errors carry a line number") {
    CHECK_THROWS_WITH_AS(parse_toml_document("[grid]\nreps = = 3\n", "bad.toml"), doctest::Contains("bad.toml:2"),
                         ParseError);
    CHECK_THROWS_AS(parse_toml_document("[run]\nwhen = 1979-05-27\n"), ParseError);
  }

  TEST_CASE("JSON and TOML files load to the same configuration") {
    testing::TempDir dir;
    std::ofstream(dir / "a.toml") << "[grid]\nn_treated = [5, 30]\ngaps = \"C2\"\n[run]\nreps = 50\n";
    std::ofstream(dir / "b.json") << R"({"grid": {"n_treated": [5, 30], "gaps": "C2"}, "run": {"reps": 50}})";
    const auto a = parse_run_config(load_config_document(dir / "a.toml"));
    const auto b = parse_run_config(load_config_document(dir / "b.json"));
    CHECK(to_json(a) == to_json(b));
    std::ofstream(dir / "c.json") << "{ not json";
    CHECK_THROWS_AS(load_config_document(dir / "c.json"), ParseError);
    CHECK_THROWS_AS(load_config_document(dir / "missing.toml"), ParseError);
  }

  TEST_CASE("to_json round trips") {
    auto c = parse_toml(R"(
[grid]
effects = [[-0.15, -0.05]]
gaps = ["C3", { label = "tight", low = 0.5, high = 1 }]
[run]
reps = 20
seed = 99
workers = 2
retain_cap = 7
[output]
results = "x.csv"
manifest = "x.json"
)");
    const auto j = to_json(c);
    const auto again = parse_run_config(j);
    CHECK(to_json(again) == j);
    CHECK(again.grid == c.grid);
    CHECK(again.retain_cap == 7);
    CHECK(j["run"]["seed"] == 99);
  }

  TEST_CASE("grid is checked against the panel") {
    auto c = parse_toml("[grid]\nn_treated = [5, 51]\n[run]\nscale_mode = \"unit_mean\"\n");
    try {
      validate_against_panel(c, *testing::default_panel());
      FAIL("expected InvalidConfig");
    } catch (const InvalidConfig& e) {
      CHECK(has_field(e.issues(), "grid.n_treated"));
      CHECK(has_field(e.issues(), "run.scale_mode"));
      // One issue per distinct problem, not per scenario.
      CHECK(e.issues().size() == 2);
    }
    const auto ok = parse_toml("[grid]\nn_treated = 5\n");
    CHECK_NOTHROW(validate_against_panel(ok, *testing::default_panel()));
  }

  TEST_CASE("default worker count from the environment") {
    ::setenv("COPOLICY_WORKERS", "6", 1);
    CHECK(default_workers() == 6);
    ::setenv("COPOLICY_WORKERS", "zero", 1);
    CHECK(default_workers() == 1);
    ::unsetenv("COPOLICY_WORKERS");
    CHECK(default_workers() == 1);
  }

  TEST_CASE("manifest") {
    const auto c = parse_toml("[run]\nseed = 5\n");
    const auto& panel = *testing::default_panel();
    const auto m = make_manifest(c, panel, 1024);
    CHECK(m["master_seed"] == 5);
    CHECK(m["n_scenarios"] == 1024);
    CHECK(m["config"] == to_json(c));
    CHECK(m.contains("version"));
    CHECK(m["panel"]["n_units"] == 50);
    CHECK(m["panel"]["grand_mean"].get<double>() == panel_summary(panel).grand_mean);
  }

  TEST_CASE("shipped configs parse") {
    for (const char* name : {"full_grid.toml", "figure1.toml"}) {
      const auto path = std::filesystem::path(COPOLICY_SOURCE_DIR) / "configs" / name;
      const auto c = parse_run_config(load_config_document(path), path.parent_path());
      CHECK_NOTHROW(validate_against_panel(c, *testing::default_panel()));
    }
    const auto fig1 = parse_run_config(
        load_config_document(std::filesystem::path(COPOLICY_SOURCE_DIR) / "configs" / "figure1.toml"));
    CHECK(expand_grid(fig1.grid).size() == 16);
  }
}
