#pragma once

#include <vector>

#include "colabmem/clones.hpp"
#include "colabmem/corpus.hpp"

namespace colabmem {

struct StatsRecord {
  double loc_per_mb = 0.0;
  double classes_per_mb = 0.0;
  double funcs_per_mb = 0.0;
  double docs_per_mb = 0.0;
  double clone_blocks_per_mb = 0.0;
  double clone_loc_per_mb = 0.0;
};

// Densities per 2^20 bytes; `clones` must come from this corpus alone.
StatsRecord per_mb_stats(const OrgCorpus& corpus,
                         const std::vector<CloneBlock>& clones);

}  // namespace colabmem
