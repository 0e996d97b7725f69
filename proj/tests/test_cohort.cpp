#include <doctest.h>

#include <algorithm>
#include <set>

#include "fairaudit/cohort.hpp"
#include "helpers.hpp"

using namespace fairaudit;
using testutil::CohortBuilder;
using testutil::TempDir;
using testutil::write_file;

namespace {

ColumnSpec basic_columns() {
  ColumnSpec spec;
  spec.id = "id";
  spec.y_true = "y";
  spec.y_score = "score";
  spec.y_pred = "pred";
  spec.attributes = {"race", "gender"};
  return spec;
}

}  // namespace

TEST_CASE("csv loading handles quoting, CRLF, and embedded newlines") {
  TempDir dir;
  const std::string path = dir.file("c.csv");
  write_file(path,
             "id,y,score,pred,race,gender\r\n"
             "r1,1,0.9,1,\"A,x\",F\r\n"
             "r2,0,0.2,0,\"line1\nline2\",M\r\n"
             "r3,1,0.5,1,\"he said \"\"hi\"\"\",F\n");
  const AuditCohort cohort = load_cohort(path, basic_columns(), TableFormat::csv);
  CHECK(cohort.size() == 3);
  const auto r1 = record_view(cohort, 0);
  CHECK(r1.attributes[0].second == "A,x");
  const auto r2 = record_view(cohort, 1);
  CHECK(r2.attributes[0].second == "line1\nline2");
  const auto r3 = record_view(cohort, 2);
  CHECK(r3.attributes[0].second == "he said \"hi\"");
}

TEST_CASE("csv loading rejects malformed input with positionful messages") {
  TempDir dir;
  auto spec = basic_columns();

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_cohort(dir.file("nope.csv"), spec, TableFormat::csv),
                    ValidationError);
  }
  SUBCASE("missing declared column") {
    const std::string path = dir.file("c.csv");
    write_file(path, "id,y,score,race,gender\nr1,1,0.5,A,F\n");
    CHECK_THROWS_WITH_AS(load_cohort(path, spec, TableFormat::csv),
                         doctest::Contains("pred"), ValidationError);
  }
  SUBCASE("field count mismatch names the data row") {
    const std::string path = dir.file("c.csv");
    write_file(path,
               "id,y,score,pred,race,gender\n"
               "r1,1,0.5,1,A,F\n"
               "r2,0,0.5,0,B\n");
    CHECK_THROWS_WITH_AS(load_cohort(path, spec, TableFormat::csv),
                         doctest::Contains("row 2"), ValidationError);
  }
  SUBCASE("non-binary outcome") {
    const std::string path = dir.file("c.csv");
    write_file(path, "id,y,score,pred,race,gender\nr1,2,0.5,1,A,F\n");
    CHECK_THROWS_AS(load_cohort(path, spec, TableFormat::csv), ValidationError);
  }
  SUBCASE("score outside [0,1]") {
    const std::string path = dir.file("c.csv");
    write_file(path, "id,y,score,pred,race,gender\nr1,1,1.5,1,A,F\n");
    CHECK_THROWS_AS(load_cohort(path, spec, TableFormat::csv), ValidationError);
  }
  SUBCASE("record with neither score nor prediction") {
    const std::string path = dir.file("c.csv");
    write_file(path, "id,y,score,pred,race,gender\nr1,1,,,A,F\n");
    CHECK_THROWS_AS(load_cohort(path, spec, TableFormat::csv), ValidationError);
  }
  SUBCASE("dangling quote") {
    const std::string path = dir.file("c.csv");
    write_file(path, "id,y,score,pred,race,gender\nr1,1,0.5,1,\"A,F\n");
    CHECK_THROWS_AS(load_cohort(path, spec, TableFormat::csv), ValidationError);
  }
}

TEST_CASE("missing attribute policy: error vs unknown category") {
  TempDir dir;
  const std::string path = dir.file("c.csv");
  write_file(path,
             "id,y,score,pred,race,gender\n"
             "r1,1,0.5,1,,F\n"
             "r2,0,0.4,0,B,M\n");
  auto spec = basic_columns();
  CHECK_THROWS_WITH_AS(load_cohort(path, spec, TableFormat::csv),
                       doctest::Contains("race"), ValidationError);

  spec.missing_policy = MissingPolicy::unknown_category;
  const AuditCohort cohort = load_cohort(path, spec, TableFormat::csv);
  CHECK(record_view(cohort, 0).attributes[0].second == kUnknownCategory);
}

TEST_CASE("jsonl loading accepts typed fields and rejects missing covariates") {
  TempDir dir;
  const std::string path = dir.file("c.jsonl");
  auto spec = basic_columns();
  spec.covariates = {"age"};
  write_file(path,
             R"({"id":"r1","y":1,"score":0.7,"pred":1,"race":"A","gender":"F","age":30})"
             "\n"
             R"({"id":"r2","y":0,"score":0.1,"pred":0,"race":"B","gender":"M","age":"41"})"
             "\n");
  const AuditCohort cohort = load_cohort(path, spec, TableFormat::jsonl);
  CHECK(cohort.size() == 2);
  CHECK(cohort.schema.covariate_numeric[0]);
  CHECK(cohort.cov_num[0][1] == doctest::Approx(41.0));

  write_file(path, R"({"id":"r1","y":1,"score":0.7,"pred":1,"race":"A","gender":"F"})"
                   "\n");
  CHECK_THROWS_WITH_AS(load_cohort(path, spec, TableFormat::jsonl),
                       doctest::Contains("age"), ValidationError);
}

TEST_CASE("subgroup enumeration partitions the cohort in canonical order") {
  Rng rng(11);
  const AuditCohort cohort = testutil::random_cohort(rng, 300, 2, 3);
  const GroupingAxis axis = make_axis("both", {"a1", "a0"}, cohort.schema);
  CHECK(axis.attribute_names == std::vector<std::string>{"a0", "a1"});

  const AxisIndex index = enumerate_subgroups(cohort, axis);
  CHECK(std::is_sorted(index.keys.begin(), index.keys.end()));
  CHECK(std::set<SubgroupKey>(index.keys.begin(), index.keys.end()).size() ==
        index.keys.size());

  int64_t total = 0;
  for (const auto c : index.counts) {
    CHECK(c > 0);
    total += c;
  }
  CHECK(total == cohort.size());
  std::vector<int64_t> recount(index.keys.size(), 0);
  for (int64_t i = 0; i < cohort.size(); ++i) {
    const int32_t cell = index.cell_of_record[i];
    REQUIRE(cell >= 0);
    REQUIRE(cell < static_cast<int32_t>(index.keys.size()));
    ++recount[cell];
    const auto view = record_view(cohort, i);
    CHECK(view.attributes[0].second == index.keys[cell].categories[0]);
    CHECK(view.attributes[1].second == index.keys[cell].categories[1]);
  }
  for (size_t c = 0; c < recount.size(); ++c) CHECK(recount[c] == index.counts[c]);
}

TEST_CASE("axis construction rejects duplicates and undeclared attributes") {
  CohortBuilder b({"race"});
  b.add(1, 1, 0.5, {"A"});
  const AuditCohort cohort = b.build();
  CHECK_THROWS_AS(make_axis("x", {"race", "race"}, cohort.schema), ConfigError);
  CHECK_THROWS_AS(make_axis("x", {"ethnicity"}, cohort.schema), ConfigError);
  CHECK_THROWS_AS(make_axis("x", {}, cohort.schema), ConfigError);
}

TEST_CASE("masking splits by n_min and is monotone in the threshold") {
  Rng rng(5);
  const AuditCohort cohort = testutil::random_cohort(rng, 400, 2, 3);
  const GroupingAxis axis =
      make_axis("both", cohort.schema.attributes, cohort.schema);
  const AxisIndex index = enumerate_subgroups(cohort, axis);

  std::vector<int32_t> prev_masked;
  for (int64_t n_min : {0, 5, 20, 60, 1000}) {
    const MaskingSplit split = apply_masking(index, MaskingPolicy{n_min});
    CHECK(split.qualifying.size() + split.masked.size() == index.keys.size());
    for (const auto c : split.qualifying) CHECK(index.counts[c] >= n_min);
    for (const auto c : split.masked) CHECK(index.counts[c] < n_min);
    // Raising the threshold can only grow the masked set.
    for (const auto c : prev_masked) {
      CHECK(std::find(split.masked.begin(), split.masked.end(), c) !=
            split.masked.end());
    }
    prev_masked = split.masked;
  }
  const MaskingSplit none = apply_masking(index, MaskingPolicy{0});
  CHECK(none.masked.empty());
}

TEST_CASE("cohort csv round-trips through write and load") {
  Rng rng(7);
  AuditCohort original = testutil::random_cohort(rng, 120, 2, 3);
  TempDir dir;
  const std::string path = dir.file("out.csv");
  write_cohort_csv(original, path);

  ColumnSpec spec;
  spec.id = "id";
  spec.y_true = "y_true";
  spec.y_score = "y_score";
  spec.y_pred = "y_pred";
  spec.attributes = original.schema.attributes;
  const AuditCohort reloaded = load_cohort(path, spec, TableFormat::csv);
  REQUIRE(reloaded.size() == original.size());
  for (int64_t i = 0; i < original.size(); ++i) {
    CHECK(reloaded.ids[i] == original.ids[i]);
    CHECK(reloaded.y_true[i] == original.y_true[i]);
    CHECK(reloaded.y_pred[i] == original.y_pred[i]);
    CHECK(reloaded.y_score[i] == original.y_score[i]);  // bit-exact
    for (size_t a = 0; a < original.schema.attributes.size(); ++a) {
      CHECK(record_view(reloaded, i).attributes[a].second ==
            record_view(original, i).attributes[a].second);
    }
  }
}

TEST_CASE("threshold rule: predict positive iff score >= tau") {
  CohortBuilder b({"g"});
  b.add(1, std::nullopt, 0.30, {"A"});
  b.add(0, std::nullopt, 0.50, {"A"});
  b.add(1, std::nullopt, 0.49999, {"A"});
  b.add(0, std::nullopt, 0.80, {"A"});
  const AuditCohort derived = derive_predictions(b.build(), 0.5);
  CHECK(derived.y_pred[0] == 0);
  CHECK(derived.y_pred[1] == 1);  // boundary counts as positive
  CHECK(derived.y_pred[2] == 0);
  CHECK(derived.y_pred[3] == 1);
}

TEST_CASE("existing predictions survive unless recompute is requested") {
  CohortBuilder b({"g"});
  b.add(1, 0, 0.9, {"A"});  // materialized pred disagrees with the score
  b.add(0, std::nullopt, 0.9, {"A"});
  const AuditCohort cohort = b.build();

  const AuditCohort kept = derive_predictions(cohort, 0.5);
  CHECK(kept.y_pred[0] == 0);
  CHECK(kept.y_pred[1] == 1);

  const AuditCohort forced = derive_predictions(cohort, 0.5, true);
  CHECK(forced.y_pred[0] == 1);
  CHECK(forced.y_pred[1] == 1);

  CHECK_THROWS_AS(derive_predictions(cohort, 1.5), ConfigError);
}

TEST_CASE("per-group thresholds apply cellwise with fallback for gaps") {
  CohortBuilder b({"g"});
  b.add(1, std::nullopt, 0.45, {"A"});
  b.add(0, std::nullopt, 0.45, {"B"});
  const AuditCohort cohort = b.build();
  const GroupingAxis axis = make_axis("g", {"g"}, cohort.schema);
  const AxisIndex index = enumerate_subgroups(cohort, axis);

  // A gets tau 0.4 (-> positive), B has no threshold -> fallback 0.9 (-> negative)
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const AuditCohort derived =
      derive_predictions(cohort, index, {0.4, nan}, 0.9, true);
  CHECK(derived.y_pred[0] == 1);
  CHECK(derived.y_pred[1] == 0);

  CHECK_THROWS_AS(derive_predictions(cohort, index, {0.4}, 0.9, true),
                  ConfigError);
}

TEST_CASE("subgroup labels join categories in axis attribute order") {
  SubgroupKey key{{"F", "A"}};
  CHECK(key.label() == "F / A");
  SubgroupKey single{{"B"}};
  CHECK(single.label() == "B");
}
