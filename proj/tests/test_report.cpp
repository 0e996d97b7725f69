#include <doctest.h>

#include <algorithm>
#include <cctype>

#include "fairaudit/report.hpp"
#include "fairaudit/rng.hpp"
#include "helpers.hpp"

using namespace fairaudit;
using testutil::TempDir;
using testutil::read_file;

namespace {

struct Fixture {
  AuditCohort cohort;
  AuditConfig config;
  FairnessPanel panel;
  CounterfactualResult cf;
};

AuditConfig fixture_config() {
  AuditConfig config;
  config.input_path = "cohort.csv";
  config.name = "fixture";
  config.columns.id = "id";
  config.columns.y_true = "y";
  config.columns.y_score = "score";
  config.columns.y_pred = "pred";
  config.columns.attributes = {"a0", "a1"};
  config.axes = {{"a0", {"a0"}}, {"a1", {"a1"}}, {"a0_x_a1", {"a0", "a1"}}};
  config.threshold.youden_axis = "a0_x_a1";
  config.counterfactual.enabled = true;
  config.counterfactual.axis = "a0";
  config.counterfactual.engine.epsilon = 0.1;
  config.counterfactual.engine.permutation_replicates = 60;
  config.counterfactual.engine.bootstrap_replicates = 25;
  config.counterfactual.engine.ci_level = 0.9;
  config.counterfactual.engine.method = CfMethod::both;
  config.seed = 7;
  config.counterfactual.engine.seed = 7;
  return config;
}

Fixture make_fixture() {
  Fixture f;
  Rng rng(404);
  f.cohort = testutil::random_cohort(rng, 200, 2, 2);
  f.config = fixture_config();

  std::vector<GroupingAxis> axes;
  for (const auto& spec : f.config.axes) {
    axes.push_back(make_axis(spec.name, spec.attributes, f.cohort.schema));
  }
  f.panel = fairness_panel(f.cohort, axes, f.config.masking,
                           f.config.observational.eo_max);

  const AxisIndex index = enumerate_subgroups(f.cohort, axes[0]);
  const MaskingSplit split = apply_masking(index, f.config.masking);
  f.cf = run_counterfactual(f.cohort, index, split.qualifying, {},
                            f.config.counterfactual.engine, f.config.learner,
                            ExecMode::serial);
  return f;
}

Fixture make_masked_fixture() {
  Fixture f;
  testutil::CohortBuilder b({"g"});
  for (int i = 0; i < 25; ++i) {
    b.add(i % 2, (i % 3 == 0) ? 1 : 0, 0.1 + 0.03 * i, {"A"});
  }
  for (int i = 0; i < 3; ++i) b.add(1, 1, 0.9, {"B"});
  f.cohort = b.build();
  f.config = fixture_config();
  f.config.columns.attributes = {"g"};
  f.config.axes = {{"g", {"g"}}};
  f.config.threshold.youden_axis = "g";
  f.config.counterfactual.enabled = false;
  f.config.counterfactual.axis = "g";
  const auto axis = make_axis("g", {"g"}, f.cohort.schema);
  f.panel = fairness_panel(f.cohort, {axis}, f.config.masking, false);
  return f;
}

int64_t count_lines(const std::string& text) {
  return std::count(text.begin(), text.end(), '\n');
}

}  // namespace

TEST_CASE("run identifiers are deterministic and input-sensitive") {
  const AuditConfig config = fixture_config();
  const Provenance prov{"cohort.csv", 200};
  const std::string id = run_id_for(config.echo(), prov);
  CHECK(id == run_id_for(config.echo(), prov));
  CHECK(id.size() == 16);
  for (char c : id) {
    CHECK(std::isxdigit(static_cast<unsigned char>(c)));
  }
  CHECK(id != run_id_for(config.echo(), Provenance{"cohort.csv", 201}));
  AuditConfig reseeded = config;
  reseeded.seed = 8;
  reseeded.counterfactual.engine.seed = 8;
  CHECK(id != run_id_for(reseeded.echo(), prov));
}

TEST_CASE("identical inputs build byte-identical reports") {
  const Fixture a = make_fixture();
  const Fixture b = make_fixture();
  const auto ra = build_report(a.cohort, a.config, a.panel, &a.cf, {"w1"});
  const auto rb = build_report(b.cohort, b.config, b.panel, &b.cf, {"w1"});
  CHECK(ra.dump(2) == rb.dump(2));

  std::vector<std::string> keys;
  for (const auto& [key, value] : ra.items()) {
    (void)value;
    keys.push_back(key);
  }
  CHECK(keys == std::vector<std::string>{
                    "schema_version", "tool", "run_id", "config", "cohort",
                    "performance", "observational", "counterfactual",
                    "warnings"});
  CHECK(ra.at("schema_version") == kReportSchemaVersion);
  CHECK(ra.at("tool") == kToolVersion);
}

TEST_CASE("reports survive a serialization round trip unchanged") {
  const Fixture f = make_fixture();
  const auto report = build_report(f.cohort, f.config, f.panel, &f.cf, {});
  const std::string once = report.dump(2);
  const auto reparsed = nlohmann::ordered_json::parse(once);
  CHECK(reparsed.dump(2) == once);
}

TEST_CASE("counterfactual results from another run are rejected") {
  const Fixture f = make_fixture();

  AuditConfig reseeded = f.config;
  reseeded.seed = 99;
  CHECK_THROWS_WITH_AS(
      build_report(f.cohort, reseeded, f.panel, &f.cf, {}),
      doctest::Contains("do not match"), ValidationError);

  AuditConfig other_axis = f.config;
  other_axis.counterfactual.axis = "a1";
  CHECK_THROWS_AS(build_report(f.cohort, other_axis, f.panel, &f.cf, {}),
                  ValidationError);
}

TEST_CASE("masked subgroups appear as flags with no statistics") {
  const Fixture f = make_masked_fixture();
  const auto report = build_report(f.cohort, f.config, f.panel, nullptr, {});

  const auto& subgroups = report.at("cohort").at("axes").at(0).at("subgroups");
  REQUIRE(subgroups.size() == 2);
  const auto& kept = subgroups.at(0);
  CHECK(kept.at("subgroup") == "A");
  CHECK(kept.at("masked") == false);
  CHECK(kept.at("n") == 25);
  const auto& masked = subgroups.at(1);
  CHECK(masked.at("subgroup") == "B");
  CHECK(masked.at("masked") == true);
  CHECK(masked.size() == 2);  // the flag and the label, nothing else

  const auto& axis = report.at("observational").at(0);
  REQUIRE(axis.at("groups").size() == 1);
  CHECK(axis.at("groups").at(0).at("subgroup") == "A");
  CHECK(axis.at("masked") == nlohmann::ordered_json::array({"B"}));
  // One qualifying group leaves every gap undefined.
  CHECK(axis.at("gaps").at("dp_gap").is_null());
  CHECK(report.at("counterfactual").is_null());
}

TEST_CASE("gap table holds one row per axis and metric") {
  TempDir dir;
  const Fixture f = make_fixture();
  const auto report = build_report(f.cohort, f.config, f.panel, &f.cf, {});
  const auto written = write_csv_tables(report, dir.path);
  REQUIRE(written.size() == 2);

  const std::string heatmap = read_file(written[0]);
  CHECK(heatmap.rfind("cohort,axis,metric,value\n", 0) == 0);
  CHECK(count_lines(heatmap) == 1 + 3 * 3);  // header + 3 axes x 3 gap metrics
  CHECK(heatmap.find("fixture,a0_x_a1,eod_gap,") != std::string::npos);

  SUBCASE("undefined gaps become empty cells") {
    const Fixture m = make_masked_fixture();
    const auto r = build_report(m.cohort, m.config, m.panel, nullptr, {});
    const auto files = write_csv_tables(r, dir.path);
    REQUIRE(files.size() == 1);  // no ECDF series, no ecdf.csv
    const std::string csv = read_file(files[0]);
    CHECK(count_lines(csv) == 1 + 3);
    CHECK(csv.find("fixture,g,dp_gap,\n") != std::string::npos);
  }
}

TEST_CASE("ecdf table rows mirror the report's step points") {
  TempDir dir;
  const Fixture f = make_fixture();
  const auto report = build_report(f.cohort, f.config, f.panel, &f.cf, {});
  const auto written = write_csv_tables(report, dir.path);
  REQUIRE(written.size() == 2);
  CHECK(written[1].find("ecdf.csv") != std::string::npos);

  int64_t expected = 0;
  for (const auto& series : report.at("counterfactual").at("ecdf")) {
    expected += static_cast<int64_t>(series.at("deltas").size());
  }
  CHECK(expected > 0);
  const std::string csv = read_file(written[1]);
  CHECK(csv.rfind("metric,delta,cum_fraction\n", 0) == 0);
  CHECK(count_lines(csv) == 1 + expected);
}

TEST_CASE("svg rendering covers every populated section") {
  TempDir dir;
  const Fixture f = make_fixture();
  const auto report = build_report(f.cohort, f.config, f.panel, &f.cf, {});
  std::vector<std::string> warnings;
  const auto files = render_svg(report, dir.path, &warnings);
  REQUIRE(files.size() == 4);
  CHECK(warnings.empty());
  CHECK(files[0].find("heatmap.svg") != std::string::npos);
  CHECK(files[1].find("ecdf.svg") != std::string::npos);
  CHECK(files[2].find("ci_positive.svg") != std::string::npos);
  CHECK(files[3].find("ci_negative.svg") != std::string::npos);

  const std::string heatmap = read_file(files[0]);
  CHECK(heatmap.find("a0_x_a1") != std::string::npos);
  CHECK(heatmap.find("accuracy ") != std::string::npos);

  const std::string ecdf = read_file(files[1]);
  CHECK(ecdf.find("stroke-dasharray=\"6 4\"") != std::string::npos);
  CHECK(ecdf.find("epsilon = 0.100") != std::string::npos);
  CHECK(ecdf.find("mean_pairwise_pos") != std::string::npos);

  const std::string ci = read_file(files[2]);
  CHECK(ci.find("standardized") != std::string::npos);
  CHECK(ci.find("permutation") != std::string::npos);
  CHECK(ci.find(">p</text>") != std::string::npos);  // subgroup row label
}

TEST_CASE("svg rendering skips absent sections with a warning each") {
  TempDir dir;
  const Fixture f = make_masked_fixture();
  const auto report = build_report(f.cohort, f.config, f.panel, nullptr, {});
  std::vector<std::string> warnings;
  const auto files = render_svg(report, dir.path, &warnings);
  REQUIRE(files.size() == 1);
  CHECK(files[0].find("heatmap.svg") != std::string::npos);
  REQUIRE(warnings.size() == 3);
  for (const auto& w : warnings) {
    CHECK(w.find("skipped") != std::string::npos);
  }
}

TEST_CASE("config echo omits emission-side settings") {
  AuditConfig config = fixture_config();
  config.output.dir = "somewhere/else";
  config.parallelism = 8;
  config.counterfactual.engine.parallelism = 8;
  const auto echo = config.echo();
  CHECK_FALSE(echo.contains("output"));
  CHECK_FALSE(echo.contains("parallelism"));
  CHECK(echo.at("learner").at("lambda").is_null());
  CHECK(echo.at("counterfactual").at("method") == "both");
  CHECK(echo.at("seed") == 7);

  // Echoes re-parse to the same resolved configuration.
  const AuditConfig reparsed = parse_audit_config(echo);
  CHECK(reparsed.echo().dump() == echo.dump());
}

TEST_CASE("config overrides reach nested keys with JSON typing") {
  nlohmann::json raw = nlohmann::json::object();
  apply_override(raw, "counterfactual.epsilon", "0.25");
  CHECK(raw.at("counterfactual").at("epsilon") == 0.25);
  apply_override(raw, "name", "renamed");
  CHECK(raw.at("name") == "renamed");
  apply_override(raw, "output.dir", "\"quoted dir\"");
  CHECK(raw.at("output").at("dir") == "quoted dir");
  apply_override(raw, "observational.eo_max", "true");
  CHECK(raw.at("observational").at("eo_max") == true);

  CHECK_THROWS_AS(apply_override(raw, "", "1"), ConfigError);
  CHECK_THROWS_AS(apply_override(raw, "a..b", "1"), ConfigError);
  raw["seed"] = 5;
  CHECK_THROWS_AS(apply_override(raw, "seed.inner", "1"), ConfigError);
}

TEST_CASE("wrong-typed config values fail as config errors") {
  nlohmann::json raw = fixture_config().echo();
  raw["masking"]["n_min"] = "twenty";
  CHECK_THROWS_WITH_AS(parse_audit_config(raw),
                       doctest::Contains("type must be number"), ConfigError);

  raw = fixture_config().echo();
  raw["counterfactual"]["enabled"] = "yes";
  CHECK_THROWS_AS(parse_audit_config(raw), ConfigError);

  raw = fixture_config().echo();
  raw["columns"]["attributes"] = "a0";
  CHECK_THROWS_AS(parse_audit_config(raw), ConfigError);
}

TEST_CASE("json reports end with a newline and fail loudly on bad paths") {
  TempDir dir;
  const Fixture f = make_masked_fixture();
  const auto report = build_report(f.cohort, f.config, f.panel, nullptr, {});
  const std::string path = dir.file("report.json");
  write_json(report, path);
  const std::string text = read_file(path);
  REQUIRE_FALSE(text.empty());
  CHECK(text.back() == '\n');
  CHECK(nlohmann::ordered_json::parse(text).dump(2) + "\n" == text);

  CHECK_THROWS_AS(write_json(report, (dir.path / "missing" / "x.json").string()),
                  ValidationError);
}
