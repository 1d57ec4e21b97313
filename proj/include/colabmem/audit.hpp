#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "colabmem/clones.hpp"
#include "colabmem/corpus.hpp"
#include "colabmem/pysurface.hpp"
#include "colabmem/tinylm.hpp"

namespace colabmem {

struct GenerationRecord {
  std::string prompt_id;
  std::string model_name;
  std::vector<std::string> samples;  // newly generated text only
  SamplingConfig sampling;
  std::vector<int> generated_line_counts;  // normalized lines per sample
  std::string error;  // nonempty when the prompt failed
};

// n_generations continuations per prompt; sample seeds derive from
// (cfg.seed, prompt id). Failing prompts produce an error record and the
// run continues.
std::vector<GenerationRecord> run_extraction(const ModelParams& model,
                                             const std::string& model_name,
                                             const std::vector<Prompt>& prompts,
                                             const SamplingConfig& cfg);

// Clone blocks between the generated samples (source id "generated", one
// pseudo-file per sample) and the corpus; only blocks occurring on both
// sides are kept.
std::vector<CloneBlock> detect_memorization(
    const std::vector<GenerationRecord>& records, const OrgCorpus& corpus,
    const CloneConfig& cfg);

struct RatioResult {
  std::size_t mem_blocks = 0;
  std::size_t mem_lines = 0;
  std::size_t lines_of_gen = 0;
  double ratio = 0.0;
};

// mem_lines counts each generated line at most once: overlapping block
// occurrences are merged per sample before counting.
RatioResult memorization_ratio(const std::vector<CloneBlock>& blocks,
                               const std::vector<GenerationRecord>& records);

// "0.249%" style rendering used by all report tables.
std::string format_ratio_percent(double ratio);

struct MemorizationRow {
  std::string org_id;
  std::size_t lines_of_gen = 0;
  std::size_t mem_blocks = 0;
  std::size_t mem_lines = 0;
  double mem_ratio = 0.0;
};

struct MemorizationReport {
  std::string model_name;
  std::vector<MemorizationRow> rows;
};

// One row per corpus: detect_memorization + memorization_ratio.
MemorizationReport audit_model(const std::vector<GenerationRecord>& records,
                               const std::string& model_name,
                               const std::vector<OrgCorpus>& corpora,
                               const CloneConfig& cfg);

// Cross-org evaluation: continuations of clone-prefix prompts are compared
// against the expected suffixes only, default threshold 3 lines.
RatioResult clone_mem_eval(const ModelParams& model,
                           const std::string& model_name,
                           const std::vector<Prompt>& clone_prompts,
                           const SamplingConfig& sampling,
                           const CloneConfig& cfg,
                           std::vector<GenerationRecord>* records_out = nullptr);

}  // namespace colabmem
