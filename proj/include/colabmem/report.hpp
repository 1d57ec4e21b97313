#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "colabmem/audit.hpp"
#include "colabmem/stats.hpp"

namespace colabmem {

struct StatsReportRow {
  std::string org_id;
  std::size_t files = 0;
  std::size_t bytes = 0;
  std::size_t loc = 0;
  std::size_t classes = 0;
  std::size_t functions = 0;
  std::size_t docstrings = 0;
  std::size_t clone_blocks = 0;
  std::size_t clone_loc = 0;
  StatsRecord per_mb;
};

struct EffectivenessRow {
  std::string model;
  std::vector<std::pair<std::string, double>> org_ppl;
  double pooled_ppl = 0.0;
};

struct PassAtKRow {
  std::string model;
  std::vector<std::pair<int, double>> mean_at_k;
};

struct CrossOrgRow {
  std::string model;
  RatioResult result;
};

struct ReportInput {
  std::vector<std::string> org_order;
  std::vector<StatsReportRow> stats;
  std::vector<EffectivenessRow> effectiveness;
  std::vector<PassAtKRow> pass_at_k;
  std::vector<MemorizationReport> memorization;
  std::vector<CrossOrgRow> cross_org;
};

// Plain-text report: corpus statistics, model effectiveness, pass@k,
// per-org memorization with summed totals, cross-org evaluation.
std::string render_report(const ReportInput& input);

}  // namespace colabmem
