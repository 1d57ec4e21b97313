#include "colabmem/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "colabmem/common.hpp"

namespace colabmem {

SourceFile make_source_file(std::string path, std::string text) {
  SourceFile f;
  f.path = std::move(path);
  f.bytes = text.size();
  f.lines = count_lines(text);
  f.text = std::move(text);
  return f;
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kUnsplit:
      return "unsplit";
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
  }
  return "unsplit";
}

std::size_t OrgCorpus::total_bytes() const {
  std::size_t n = 0;
  for (const auto& f : files) n += f.bytes;
  return n;
}

std::size_t OrgCorpus::total_lines() const {
  std::size_t n = 0;
  for (const auto& f : files) n += f.lines;
  return n;
}

OrgCorpus make_corpus(std::string org_id, std::vector<SourceFile> files,
                      Split split) {
  if (org_id.empty()) throw Error("corpus", "org_id must be nonempty");
  std::sort(files.begin(), files.end(),
            [](const SourceFile& a, const SourceFile& b) { return a.path < b.path; });
  for (std::size_t i = 1; i < files.size(); ++i) {
    if (files[i].path == files[i - 1].path) {
      throw Error("corpus", "duplicate path in corpus: " + files[i].path);
    }
  }
  OrgCorpus c;
  c.org_id = std::move(org_id);
  c.files = std::move(files);
  c.split = split;
  return c;
}

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.substr(s.size() - suffix.size()) == suffix;
}

std::string relative_slash_path(const std::filesystem::path& p,
                                const std::filesystem::path& root) {
  return p.lexically_relative(root).generic_string();
}

}  // namespace

std::pair<OrgCorpus, std::vector<SkipRecord>> ingest(
    const std::filesystem::path& root_dir, std::string_view org_id,
    const IngestOptions& opts) {
  namespace fs = std::filesystem;
  if (!fs::exists(root_dir) || !fs::is_directory(root_dir)) {
    throw Error("io", "corpus directory not found: " + root_dir.string());
  }
  std::vector<SourceFile> files;
  std::vector<SkipRecord> skipped;
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(root_dir)) {
    if (!entry.is_regular_file()) continue;
    if (!ends_with(entry.path().filename().string(), opts.suffix)) continue;
    paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end(),
            [&](const fs::path& a, const fs::path& b) {
              return relative_slash_path(a, root_dir) <
                     relative_slash_path(b, root_dir);
            });
  for (const auto& p : paths) {
    std::string rel = relative_slash_path(p, root_dir);
    std::ifstream in(p, std::ios::binary);
    if (!in) {
      skipped.push_back({rel, "unreadable"});
      continue;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = std::move(buf).str();
    if (!is_valid_utf8(text)) {
      skipped.push_back({rel, "invalid_utf8"});
      continue;
    }
    files.push_back(make_source_file(std::move(rel), std::move(text)));
  }
  return {make_corpus(std::string(org_id), std::move(files)), std::move(skipped)};
}

namespace {

bool contains_marker_ci(std::string_view text, std::string_view marker,
                        int line_window) {
  // Scan only the first `line_window` lines.
  std::size_t end = 0;
  int lines_seen = 0;
  while (end < text.size() && lines_seen < line_window) {
    if (text[end] == '\n') ++lines_seen;
    ++end;
  }
  std::string_view head = text.substr(0, end);
  if (marker.empty() || head.size() < marker.size()) return false;
  auto lower = [](char c) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  };
  for (std::size_t i = 0; i + marker.size() <= head.size(); ++i) {
    bool match = true;
    for (std::size_t j = 0; j < marker.size(); ++j) {
      if (lower(head[i + j]) != lower(marker[j])) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

}  // namespace

std::pair<OrgCorpus, std::vector<SkipRecord>> filter_files(
    const OrgCorpus& corpus, const FilterOptions& opts) {
  if (corpus.split != Split::kUnsplit) {
    throw Error("corpus", "filter_files expects an unsplit corpus");
  }
  std::vector<SourceFile> kept;
  std::vector<SkipRecord> dropped;
  for (const auto& f : corpus.files) {
    if (alnum_fraction(f.text) < opts.min_alnum_fraction) {
      dropped.push_back({f.path, "alnum_fraction"});
      continue;
    }
    if (contains_marker_ci(f.text, opts.generated_marker,
                           opts.marker_line_window)) {
      dropped.push_back({f.path, "auto_generated"});
      continue;
    }
    kept.push_back(f);
  }
  return {make_corpus(corpus.org_id, std::move(kept)), std::move(dropped)};
}

std::pair<OrgCorpus, OrgCorpus> split_corpus(const OrgCorpus& corpus,
                                             double train_fraction,
                                             std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error("config", "train_fraction must lie in (0, 1)");
  }
  if (corpus.files.size() < 2) {
    throw Error("corpus", "need at least 2 files to split corpus '" +
                              corpus.org_id + "'");
  }
  std::vector<std::size_t> order(corpus.files.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, {"split", corpus.org_id}));
  rng.shuffle(order);
  auto n_train = static_cast<std::size_t>(
      std::ceil(train_fraction * static_cast<double>(order.size())));
  if (n_train == order.size()) --n_train;  // fraction close to 1: keep ≥ 1 val
  std::vector<SourceFile> train_files, val_files;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? train_files : val_files).push_back(corpus.files[order[i]]);
  }
  return {make_corpus(corpus.org_id, std::move(train_files), Split::kTrain),
          make_corpus(corpus.org_id, std::move(val_files), Split::kValidation)};
}

}  // namespace colabmem
