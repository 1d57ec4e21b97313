#pragma once

#include <string>
#include <vector>

#include "colabmem/config.hpp"

namespace colabmem {

// Stage entry points behind the CLI subcommands. Each stage reads the
// artifacts of the stages before it from cfg.out_dir, verifies they were
// produced under the same config hash, and writes its own output
// atomically (temp file + rename). A missing upstream artifact raises an
// Error naming the subcommand that produces it.
void run_ingest(const RunConfig& cfg);
void run_dedup(const RunConfig& cfg);
void run_stats(const RunConfig& cfg);
void run_clones(const RunConfig& cfg);
void run_prompts(const RunConfig& cfg);
void run_train(const RunConfig& cfg);
void run_generate(const RunConfig& cfg);
void run_audit(const RunConfig& cfg);
void run_crossorg(const RunConfig& cfg);
void run_passk(const RunConfig& cfg);
void run_report(const RunConfig& cfg);

const std::vector<std::string>& stage_names();
void run_stage(const std::string& name, const RunConfig& cfg);

// Registry name for a configured model entry.
std::string model_name_for(const RunConfig& cfg, const ModelSpec& spec);

// Toy functional-correctness check: the canonical output's normalized
// lines appear as one consecutive run inside the sample's normalized lines.
bool exact_match_pass(const std::string& sample, const std::string& canonical);

}  // namespace colabmem
