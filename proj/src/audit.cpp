#include "colabmem/audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "colabmem/common.hpp"

namespace colabmem {

namespace {

constexpr const char* kGeneratedSource = "generated";

std::string sample_path(const std::string& prompt_id, std::size_t index) {
  return prompt_id + "#" + std::to_string(index);
}

}  // namespace

std::vector<GenerationRecord> run_extraction(const ModelParams& model,
                                             const std::string& model_name,
                                             const std::vector<Prompt>& prompts,
                                             const SamplingConfig& cfg) {
  std::vector<GenerationRecord> records;
  records.reserve(prompts.size());
  for (const auto& prompt : prompts) {
    GenerationRecord rec;
    rec.prompt_id = prompt.id;
    rec.model_name = model_name;
    rec.sampling = cfg;
    rec.sampling.seed = derive_seed(cfg.seed, {"extract", prompt.id});
    try {
      auto sampled =
          generate(model, tokenize(prompt.text), rec.sampling);
      for (const auto& tokens : sampled) {
        std::string text = detokenize(tokens);
        rec.generated_line_counts.push_back(
            static_cast<int>(normalize_lines(text).lines.size()));
        rec.samples.push_back(std::move(text));
      }
    } catch (const Error& e) {
      rec.error = e.what();
      rec.samples.clear();
      rec.generated_line_counts.clear();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

namespace {

CloneSource generated_source(const std::vector<GenerationRecord>& records) {
  CloneSource src;
  src.source_id = kGeneratedSource;
  for (const auto& rec : records) {
    for (std::size_t s = 0; s < rec.samples.size(); ++s) {
      src.files.push_back({sample_path(rec.prompt_id, s), rec.samples[s]});
    }
  }
  return src;
}

std::vector<CloneBlock> both_sides_only(std::vector<CloneBlock> blocks) {
  std::vector<CloneBlock> out;
  for (auto& blk : blocks) {
    bool gen = false, ref = false;
    for (const auto& occ : blk.occurrences) {
      (occ.source_id == kGeneratedSource ? gen : ref) = true;
    }
    if (gen && ref) out.push_back(std::move(blk));
  }
  return out;
}

}  // namespace

std::vector<CloneBlock> detect_memorization(
    const std::vector<GenerationRecord>& records, const OrgCorpus& corpus,
    const CloneConfig& cfg) {
  std::vector<CloneSource> sources;
  sources.push_back(generated_source(records));
  sources.push_back(to_clone_source(corpus));
  return both_sides_only(detect_clones(sources, cfg));
}

RatioResult memorization_ratio(const std::vector<CloneBlock>& blocks,
                               const std::vector<GenerationRecord>& records) {
  RatioResult r;
  for (const auto& rec : records) {
    for (int n : rec.generated_line_counts) {
      r.lines_of_gen += static_cast<std::size_t>(n);
    }
  }
  if (r.lines_of_gen == 0) {
    throw Error("audit", "no generated lines to compute a ratio over");
  }
  // Merge covered [start, end) normalized-line ranges per generated sample.
  std::map<std::string, std::vector<std::pair<int, int>>> covered;
  for (const auto& blk : blocks) {
    bool counted = false;
    for (const auto& occ : blk.occurrences) {
      if (occ.source_id != kGeneratedSource) continue;
      counted = true;
      covered[occ.path].emplace_back(occ.norm_start,
                                     occ.norm_start + blk.line_count);
    }
    if (counted) ++r.mem_blocks;
  }
  for (auto& [path, ranges] : covered) {
    std::sort(ranges.begin(), ranges.end());
    int end = -1;
    for (const auto& [b, e] : ranges) {
      int from = std::max(b, end);
      if (e > from) r.mem_lines += static_cast<std::size_t>(e - from);
      end = std::max(end, e);
    }
  }
  r.ratio = static_cast<double>(r.mem_lines) /
            static_cast<double>(r.lines_of_gen);
  return r;
}

std::string format_ratio_percent(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f%%", ratio * 100.0);
  return buf;
}

MemorizationReport audit_model(const std::vector<GenerationRecord>& records,
                               const std::string& model_name,
                               const std::vector<OrgCorpus>& corpora,
                               const CloneConfig& cfg) {
  MemorizationReport report;
  report.model_name = model_name;
  for (const auto& corpus : corpora) {
    auto blocks = detect_memorization(records, corpus, cfg);
    RatioResult r = memorization_ratio(blocks, records);
    report.rows.push_back(
        {corpus.org_id, r.lines_of_gen, r.mem_blocks, r.mem_lines, r.ratio});
  }
  return report;
}

RatioResult clone_mem_eval(const ModelParams& model,
                           const std::string& model_name,
                           const std::vector<Prompt>& clone_prompts,
                           const SamplingConfig& sampling,
                           const CloneConfig& cfg,
                           std::vector<GenerationRecord>* records_out) {
  if (clone_prompts.empty()) {
    throw Error("audit", "no clone-prefix prompts supplied");
  }
  for (const auto& p : clone_prompts) {
    if (p.kind != PromptKind::kClonePrefix || !p.expected_suffix.has_value()) {
      throw Error("audit", "prompt '" + p.id + "' is not a clone prefix");
    }
  }
  auto records = run_extraction(model, model_name, clone_prompts, sampling);
  CloneSource reference;
  reference.source_id = "reference";
  for (const auto& p : clone_prompts) {
    reference.files.push_back({p.id + ":suffix", *p.expected_suffix});
  }
  std::vector<CloneSource> sources;
  sources.push_back(generated_source(records));
  sources.push_back(std::move(reference));
  auto blocks = both_sides_only(detect_clones(sources, cfg));
  RatioResult r = memorization_ratio(blocks, records);
  if (records_out) *records_out = std::move(records);
  return r;
}

}  // namespace colabmem
