#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace colabmem {

// Deterministic synthetic corpus: three orgs of small Python files with
// planted duplication, plus filter and dedup fodder. Org B embeds one
// heavily duplicated function; orgs A and C share one identical function;
// every org repeats its own small helper across a few files.
struct FixtureOptions {
  std::uint64_t seed = 42;
  int files_per_org = 40;
  int target_file_bytes = 2300;
  int dup_copies = 10;       // org B's duplicated function
  int helper_copies = 5;     // per-org helper repeats
  int crossorg_copies = 2;   // host files per org for the shared function
  double docstring_fraction = 0.7;
};

struct FixtureManifest {
  std::vector<std::string> org_ids;  // "A", "B", "C"
  std::size_t total_functions = 0;
  std::size_t documented_functions = 0;
  std::vector<std::string> dup_host_files;       // org B, relative paths
  std::vector<std::string> crossorg_host_files;  // "org/path" form
  std::size_t bytes_per_org[3] = {0, 0, 0};
};

// Writes <root>/orgs/<org>/... and <root>/tasks.jsonl.
FixtureManifest write_fixture(const std::filesystem::path& root,
                              const FixtureOptions& opts = {});

// Planted texts, exposed so tests can match them against model output.
const std::string& fixture_dup_function();
const std::string& fixture_crossorg_function();
std::string fixture_helper_function(std::string_view org_id);

}  // namespace colabmem
