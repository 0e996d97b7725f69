#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fairaudit/cohort.hpp"
#include "fairaudit/rng.hpp"

namespace testutil {

// Unique scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static uint64_t counter = 0;
    const auto base = std::filesystem::temp_directory_path();
    do {
      path = base / ("fairaudit_test_" + std::to_string(::getpid()) + "_" +
                     std::to_string(counter++));
    } while (std::filesystem::exists(path));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small in-memory cohort builder for unit tests.
struct CohortBuilder {
  fairaudit::ColumnSpec spec;
  std::vector<fairaudit::PredictionRecord> records;

  explicit CohortBuilder(std::vector<std::string> attributes,
                         std::vector<std::string> covariates = {}) {
    spec.id = "id";
    spec.y_true = "y";
    spec.y_score = "score";
    spec.y_pred = "pred";
    spec.attributes = std::move(attributes);
    spec.covariates = std::move(covariates);
  }

  CohortBuilder& add(int y, std::optional<int> pred,
                     std::optional<double> score,
                     std::vector<std::string> cats,
                     std::vector<double> covs = {}) {
    fairaudit::PredictionRecord rec;
    rec.id = "r" + std::to_string(records.size() + 1);
    rec.y_true = y;
    rec.y_pred = pred;
    rec.y_score = score;
    for (size_t i = 0; i < cats.size(); ++i) {
      rec.attributes.emplace_back(spec.attributes[i], cats[i]);
    }
    for (size_t i = 0; i < covs.size(); ++i) {
      fairaudit::CovariateValue v;
      v.numeric = true;
      v.num = covs[i];
      rec.covariates.emplace_back(spec.covariates[i], v);
    }
    records.push_back(std::move(rec));
    return *this;
  }

  fairaudit::AuditCohort build(const std::string& source = "test") const {
    return fairaudit::cohort_from_records(records, spec, source);
  }
};

// Random labeled cohort over a handful of attribute combinations; every
// record gets a score and a prediction.
inline fairaudit::AuditCohort random_cohort(fairaudit::Rng& rng, int64_t n,
                                            int n_attrs, int vocab) {
  std::vector<std::string> attrs;
  for (int a = 0; a < n_attrs; ++a) attrs.push_back("a" + std::to_string(a));
  CohortBuilder b(attrs);
  for (int64_t i = 0; i < n; ++i) {
    std::vector<std::string> cats;
    for (int a = 0; a < n_attrs; ++a) {
      cats.push_back(std::string(1, static_cast<char>(
                                        'p' + rng.uniform_below(vocab))));
    }
    const int y = rng.bernoulli(0.4) ? 1 : 0;
    const double score = rng.uniform01();
    const int pred = rng.bernoulli(y ? 0.7 : 0.3) ? 1 : 0;
    b.add(y, pred, score, cats);
  }
  return b.build();
}

}  // namespace testutil
