#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace colabmem {

struct SourceFile {
  std::string path;   // relative, '/'-separated
  std::string text;   // UTF-8
  std::size_t bytes = 0;
  std::size_t lines = 0;
};

SourceFile make_source_file(std::string path, std::string text);

enum class Split { kUnsplit, kTrain, kValidation };

std::string_view split_name(Split s);

struct OrgCorpus {
  std::string org_id;
  std::vector<SourceFile> files;  // sorted by path
  Split split = Split::kUnsplit;

  std::size_t total_bytes() const;
  std::size_t total_lines() const;
};

// Sorts files by path, checks path uniqueness and org_id non-emptiness.
OrgCorpus make_corpus(std::string org_id, std::vector<SourceFile> files,
                      Split split = Split::kUnsplit);

struct SkipRecord {
  std::string path;
  std::string reason;
};

struct IngestOptions {
  std::string suffix = ".py";
};

// Walks root_dir, keeps regular files matching the suffix, decodes as UTF-8.
// Undecodable or unreadable files become skip records.
std::pair<OrgCorpus, std::vector<SkipRecord>> ingest(
    const std::filesystem::path& root_dir, std::string_view org_id,
    const IngestOptions& opts = {});

struct FilterOptions {
  double min_alnum_fraction = 0.25;
  std::string generated_marker = "auto-generated";  // case-insensitive
  int marker_line_window = 5;
};

// Drops files below the alphanumeric-fraction floor and files whose first
// few lines carry the generated-code marker. Text of kept files is untouched.
std::pair<OrgCorpus, std::vector<SkipRecord>> filter_files(
    const OrgCorpus& corpus, const FilterOptions& opts = {});

// Seeded shuffle, then the first ceil(train_fraction * N) files form the
// train split. Within each side, files are re-sorted by path.
std::pair<OrgCorpus, OrgCorpus> split_corpus(const OrgCorpus& corpus,
                                             double train_fraction,
                                             std::uint64_t seed);

}  // namespace colabmem
