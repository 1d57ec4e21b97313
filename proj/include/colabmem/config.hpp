#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "colabmem/clones.hpp"
#include "colabmem/corpus.hpp"
#include "colabmem/dedup.hpp"
#include "colabmem/tinylm.hpp"

namespace colabmem {

struct OrgSource {
  std::string id;
  std::string dir;
};

// One model to train; parsed from strings like "centralized", "fedavg",
// "fedyogi", "incremental:A2B2C", "only:A".
struct ModelSpec {
  std::string raw;
  std::string strategy;            // centralized|fedavg|fedyogi|incremental|only
  std::vector<std::string> order;  // incremental stages or the single only-org
};

struct PasskConfig {
  int n = 200;
  std::vector<int> k = {1, 10, 100};
  std::string tasks_file;                        // {prompt, canonical_output} records
  std::vector<std::pair<int, int>> counts;       // externally supplied (n, c)
};

struct RunConfig {
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  std::vector<OrgSource> orgs;
  std::string source_suffix = ".py";

  FilterOptions filter;
  DedupOptions dedup;  // seed field is filled from the global seed
  double train_fraction = 0.9;
  CloneConfig clones;            // intra/cross-org collection threshold
  CloneConfig crossorg_eval;     // evaluation threshold (default 3)
  ArchConfig arch;
  TrainHyper hyper;              // epochs field unused; see per-strategy ones
  int centralized_epochs = 10;
  int incremental_epochs = 10;
  int federated_rounds = 10;
  int federated_local_epochs = 1;
  std::string client_weights = "by_size";
  std::vector<ModelSpec> models;
  SamplingConfig sampling;       // seed field is filled from the global seed
  double prompt_fraction = 0.1;
  PasskConfig passk;

  // FNV-1a over the canonical serialized form, out_dir excluded.
  std::uint64_t config_hash = 0;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);

// Applies "a.b.c=value" dotted-path overrides to the raw JSON before
// parsing; values are parsed as JSON, falling back to strings.
RunConfig load_config_with_overrides(const std::filesystem::path& path,
                                     const std::vector<std::string>& overrides,
                                     const std::string* seed_override,
                                     const std::string* out_override);

std::string config_hash_hex(const RunConfig& cfg);

}  // namespace colabmem
