#include "colabmem/stats.hpp"

#include "colabmem/common.hpp"
#include "colabmem/pysurface.hpp"

namespace colabmem {

StatsRecord per_mb_stats(const OrgCorpus& corpus,
                         const std::vector<CloneBlock>& clones) {
  const double mb =
      static_cast<double>(corpus.total_bytes()) / (1024.0 * 1024.0);
  if (mb <= 0.0) {
    throw Error("stats", "corpus '" + corpus.org_id + "' has zero bytes");
  }
  SurfaceCounts surface = count_surface(corpus);
  StatsRecord r;
  r.loc_per_mb = static_cast<double>(corpus.total_lines()) / mb;
  r.classes_per_mb = static_cast<double>(surface.classes) / mb;
  r.funcs_per_mb = static_cast<double>(surface.functions) / mb;
  r.docs_per_mb = static_cast<double>(surface.docstrings) / mb;
  r.clone_blocks_per_mb = static_cast<double>(clones.size()) / mb;
  r.clone_loc_per_mb = static_cast<double>(total_clone_lines(clones)) / mb;
  return r;
}

}  // namespace colabmem
