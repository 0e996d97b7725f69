// Benchmark: permutation-null replicate throughput, serial reference vs the
// OpenMP kernel, across cohort sizes and replicate counts. Prints a table
// and verifies byte-identical outputs along the way.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "fairaudit/counterfactual.hpp"
#include "fairaudit/parallel.hpp"
#include "fairaudit/synth.hpp"

using namespace fairaudit;

namespace {

AuditCohort make_cohort(int64_t per_cell, uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;
  spec.attributes = {{"race", {"A", "B", "C"}}, {"sex", {"M", "F"}}};
  const std::vector<double> tprs = {0.80, 0.75, 0.70, 0.72, 0.78, 0.74};
  const std::vector<double> fprs = {0.20, 0.25, 0.30, 0.28, 0.22, 0.26};
  size_t idx = 0;
  for (const char* rv : {"A", "B", "C"}) {
    for (const char* sv : {"M", "F"}) {
      SynthCell cell;
      cell.categories = {{"race", rv}, {"sex", sv}};
      cell.size = per_cell;
      cell.prevalence = 0.5;
      cell.tpr = tprs[idx];
      cell.fpr = fprs[idx];
      spec.cells.push_back(std::move(cell));
      ++idx;
    }
  }
  return generate_cohort(spec);
}

double time_run(const CfView& view, const CounterfactualConfig& cfg,
                ExecMode mode,
                std::map<std::string, NullDistribution>* out) {
  const auto t0 = std::chrono::steady_clock::now();
  auto nulls = permutation_null(view, kNullMetrics, cfg, mode);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  if (out) *out = std::move(nulls);
  return secs;
}

bool identical(const std::map<std::string, NullDistribution>& a,
               const std::map<std::string, NullDistribution>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [metric, da] : a) {
    const auto it = b.find(metric);
    if (it == b.end() || da.replicates != it->second.replicates ||
        da.observed != it->second.observed) {
      return false;
    }
  }
  return true;
}

}  // namespace

int main() {
  const int threads = resolve_threads(0);
  std::printf("permutation-null throughput, 6 cells, 9 metrics, %d thread%s\n\n",
              threads, threads == 1 ? "" : "s");
  std::printf("%10s %8s %12s %12s %9s %6s\n", "records", "R", "serial(s)",
              "openmp(s)", "speedup", "match");

  bool all_match = true;
  for (const auto& [per_cell, replicates] :
       std::vector<std::pair<int64_t, int64_t>>{
           {2000, 500}, {8000, 500}, {33333, 1000}}) {
    const AuditCohort cohort = make_cohort(per_cell, 42);
    const AxisIndex index = enumerate_subgroups(
        cohort, make_axis("race_x_sex", {"race", "sex"}, cohort.schema));
    const MaskingSplit split = apply_masking(index, MaskingPolicy{});
    const CfView view = make_cf_view(cohort, index, split.qualifying);

    CounterfactualConfig cfg;
    cfg.permutation_replicates = replicates;
    cfg.seed = 42;

    std::map<std::string, NullDistribution> serial_nulls, openmp_nulls;
    const double serial_s = time_run(view, cfg, ExecMode::serial, &serial_nulls);
    const double openmp_s = time_run(view, cfg, ExecMode::openmp, &openmp_nulls);
    const bool match = identical(serial_nulls, openmp_nulls);
    all_match = all_match && match;

    std::printf("%10lld %8lld %12.3f %12.3f %8.2fx %6s\n",
                static_cast<long long>(cohort.size()),
                static_cast<long long>(replicates), serial_s, openmp_s,
                serial_s / openmp_s, match ? "yes" : "NO");
  }
  std::printf("\nserial and openmp outputs %s\n",
              all_match ? "are bit-identical" : "DIFFER");
  return all_match ? 0 : 1;
}
