#include "colabmem/clones.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <unordered_map>

#include "colabmem/common.hpp"

namespace colabmem {

NormalizedText normalize_lines(std::string_view text) {
  NormalizedText out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    if (pos == text.size() && line_no > 0 && text.back() == '\n') break;
    std::size_t nl = text.find('\n', pos);
    std::string_view raw = (nl == std::string_view::npos)
                               ? text.substr(pos)
                               : text.substr(pos, nl - pos);
    ++line_no;
    std::size_t b = 0, e = raw.size();
    while (b < e && (raw[b] == ' ' || raw[b] == '\t' || raw[b] == '\r')) ++b;
    while (e > b &&
           (raw[e - 1] == ' ' || raw[e - 1] == '\t' || raw[e - 1] == '\r')) {
      --e;
    }
    if (e > b) {
      out.lines.emplace_back(raw.substr(b, e - b));
      out.line_numbers.push_back(line_no);
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

CloneSource to_clone_source(const OrgCorpus& corpus) {
  CloneSource src;
  src.source_id = corpus.org_id;
  src.files.reserve(corpus.files.size());
  for (const auto& f : corpus.files) src.files.push_back({f.path, f.text});
  return src;
}

namespace {

// The corpus is flattened into one integer sequence: each distinct
// normalized line gets an id >= 0, and every file is terminated by a
// sentinel id unique to that file, so no repeat can cross a file boundary.
struct FlatCorpus {
  std::vector<std::int64_t> sym;
  // Per position: which file it belongs to (for sentinel positions too).
  std::vector<int> file_of;
  // Per file: [begin, end) range of its line positions in sym.
  std::vector<std::pair<int, int>> file_range;
  std::vector<int> file_source;               // file index -> source index
  std::vector<const CloneFile*> files;
  std::vector<NormalizedText> norm;
  std::vector<std::string> line_table;        // id -> line text
};

FlatCorpus flatten(const std::vector<CloneSource>& sources) {
  FlatCorpus fc;
  std::unordered_map<std::string, std::int64_t> intern;
  std::int64_t next_sentinel = -1;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    for (const auto& f : sources[s].files) {
      int file_idx = static_cast<int>(fc.files.size());
      fc.files.push_back(&f);
      fc.file_source.push_back(static_cast<int>(s));
      fc.norm.push_back(normalize_lines(f.text));
      const auto& lines = fc.norm.back().lines;
      int begin = static_cast<int>(fc.sym.size());
      for (const auto& line : lines) {
        auto [it, inserted] = intern.try_emplace(
            line, static_cast<std::int64_t>(fc.line_table.size()));
        if (inserted) fc.line_table.push_back(line);
        fc.sym.push_back(it->second);
        fc.file_of.push_back(file_idx);
      }
      fc.file_range.emplace_back(begin, static_cast<int>(fc.sym.size()));
      fc.sym.push_back(next_sentinel--);
      fc.file_of.push_back(file_idx);
    }
  }
  return fc;
}

bool occurrence_less(const CloneOccurrence& a, const CloneOccurrence& b) {
  if (a.source_id != b.source_id) return a.source_id < b.source_id;
  if (a.path != b.path) return a.path < b.path;
  return a.start_line < b.start_line;
}

}  // namespace

std::vector<CloneBlock> detect_clones(const std::vector<CloneSource>& sources,
                                      const CloneConfig& cfg) {
  if (cfg.min_lines < 2) throw Error("config", "min_lines must be >= 2");
  const int L = cfg.min_lines;
  FlatCorpus fc = flatten(sources);
  const auto& sym = fc.sym;
  const int n = static_cast<int>(sym.size());

  // Seed groups: all positions sharing the same L-gram of line ids.
  // Bucketing by rolling hash first, exact id comparison within buckets.
  std::unordered_map<std::uint64_t, std::vector<int>> buckets;
  for (int p = 0; p + L <= n; ++p) {
    bool in_one_file = true;
    for (int j = 0; j < L; ++j) {
      if (sym[p + j] < 0) {
        in_one_file = false;
        p += j;  // skip past the sentinel; loop ++ moves to the next start
        break;
      }
    }
    if (!in_one_file) continue;
    std::uint64_t h = kFnvOffset;
    for (int j = 0; j < L; ++j) {
      h = fnv1a64_u64(static_cast<std::uint64_t>(sym[p + j]), h);
    }
    buckets[h].push_back(p);
  }

  struct Group {
    std::vector<int> positions;
    int len;
  };
  std::vector<Group> stack;
  for (auto& [h, positions] : buckets) {
    if (positions.size() < 2) continue;
    // Split hash collisions by true window content.
    std::map<std::vector<std::int64_t>, std::vector<int>> exact;
    for (int p : positions) {
      exact[std::vector<std::int64_t>(sym.begin() + p, sym.begin() + p + L)]
          .push_back(p);
    }
    for (auto& [key, group] : exact) {
      if (group.size() >= 2) stack.push_back({std::move(group), L});
    }
  }

  std::vector<CloneBlock> blocks;
  while (!stack.empty()) {
    Group g = std::move(stack.back());
    stack.pop_back();
    // Extend right while every occurrence is followed by the same line.
    // Sentinels are unique, so extension always stops at file ends.
    for (;;) {
      std::int64_t next = sym[g.positions[0] + g.len];
      if (next < 0) break;
      bool all_equal = true;
      for (std::size_t i = 1; i < g.positions.size(); ++i) {
        if (sym[g.positions[i] + g.len] != next) {
          all_equal = false;
          break;
        }
      }
      if (!all_equal) break;
      ++g.len;
    }
    // Right extension stalled. Report if the set is also left-maximal;
    // otherwise the shifted seed reaches this content with one more line.
    bool left_extendable = true;
    {
      int p0 = g.positions[0];
      std::int64_t prev =
          (p0 == 0 || fc.file_of[p0 - 1] != fc.file_of[p0]) ? -1 : sym[p0 - 1];
      if (prev < 0) {
        left_extendable = false;
      } else {
        for (int p : g.positions) {
          if (p == 0 || sym[p - 1] != prev) {
            left_extendable = false;
            break;
          }
        }
      }
    }
    if (!left_extendable) {
      CloneBlock blk;
      blk.line_count = g.len;
      blk.normalized_lines.reserve(g.len);
      for (int j = 0; j < g.len; ++j) {
        blk.normalized_lines.push_back(fc.line_table[sym[g.positions[0] + j]]);
      }
      for (int p : g.positions) {
        int file_idx = fc.file_of[p];
        int norm_idx = p - fc.file_range[file_idx].first;
        CloneOccurrence occ;
        occ.source_id = sources[fc.file_source[file_idx]].source_id;
        occ.path = fc.files[file_idx]->path;
        occ.start_line = fc.norm[file_idx].line_numbers[norm_idx];
        occ.norm_start = norm_idx;
        blk.occurrences.push_back(std::move(occ));
      }
      std::sort(blk.occurrences.begin(), blk.occurrences.end(),
                occurrence_less);
      blocks.push_back(std::move(blk));
    }
    // Continue extension within sub-groups that agree on the next line.
    std::map<std::int64_t, std::vector<int>> parts;
    for (int p : g.positions) {
      std::int64_t next = sym[p + g.len];
      if (next >= 0) parts[next].push_back(p);
    }
    for (auto& [next, part] : parts) {
      if (part.size() >= 2) stack.push_back({std::move(part), g.len + 1});
    }
  }

  std::sort(blocks.begin(), blocks.end(),
            [](const CloneBlock& a, const CloneBlock& b) {
              if (a.line_count != b.line_count) {
                return a.line_count > b.line_count;
              }
              const auto& oa = a.occurrences.front();
              const auto& ob = b.occurrences.front();
              if (oa.source_id != ob.source_id) return oa.source_id < ob.source_id;
              if (oa.path != ob.path) return oa.path < ob.path;
              if (oa.start_line != ob.start_line) {
                return oa.start_line < ob.start_line;
              }
              return a.normalized_lines < b.normalized_lines;
            });
  return blocks;
}

std::vector<CloneBlock> cross_org_clones(const std::vector<OrgCorpus>& corpora,
                                         const CloneConfig& cfg) {
  if (corpora.size() < 2) {
    throw Error("config", "cross-org clone detection needs >= 2 corpora");
  }
  std::vector<CloneSource> sources;
  sources.reserve(corpora.size());
  for (const auto& c : corpora) sources.push_back(to_clone_source(c));
  std::vector<CloneBlock> all = detect_clones(sources, cfg);
  std::vector<CloneBlock> cross;
  for (auto& blk : all) {
    std::set<std::string_view> orgs;
    for (const auto& occ : blk.occurrences) orgs.insert(occ.source_id);
    if (orgs.size() >= 2) cross.push_back(std::move(blk));
  }
  return cross;
}

std::size_t total_clone_lines(const std::vector<CloneBlock>& blocks) {
  std::size_t n = 0;
  for (const auto& b : blocks) n += static_cast<std::size_t>(b.line_count);
  return n;
}

}  // namespace colabmem
