#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "colabmem/corpus.hpp"

namespace colabmem {

struct CloneConfig {
  int min_lines = 6;
};

struct CloneOccurrence {
  std::string source_id;
  std::string path;
  int start_line = 0;  // 1-based line number in the original text
  int norm_start = 0;  // 0-based index into the file's normalized lines
};

struct CloneBlock {
  int line_count = 0;
  std::vector<std::string> normalized_lines;
  std::vector<CloneOccurrence> occurrences;  // >= 2, sorted
};

struct NormalizedText {
  std::vector<std::string> lines;      // trimmed, blank lines removed
  std::vector<int> line_numbers;       // original 1-based number per line
};

NormalizedText normalize_lines(std::string_view text);

struct CloneFile {
  std::string path;
  std::string text;
};

struct CloneSource {
  std::string source_id;
  std::vector<CloneFile> files;
};

CloneSource to_clone_source(const OrgCorpus& corpus);

// All maximal blocks of >= cfg.min_lines identical normalized lines that
// occur at >= 2 distinct (path, start) sites. Maximal means the occurrence
// set cannot be extended by one line to the left or right at every site
// simultaneously. Sorted by (line_count desc, first path, first start_line).
std::vector<CloneBlock> detect_clones(const std::vector<CloneSource>& sources,
                                      const CloneConfig& cfg);

// detect_clones over the corpora (source_id = org_id), keeping only blocks
// whose occurrences span >= 2 distinct orgs.
std::vector<CloneBlock> cross_org_clones(const std::vector<OrgCorpus>& corpora,
                                         const CloneConfig& cfg);

// Sum of line_count over blocks; the "Clone Lns" figure of the stats table.
std::size_t total_clone_lines(const std::vector<CloneBlock>& blocks);

}  // namespace colabmem
