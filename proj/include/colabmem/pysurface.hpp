#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "colabmem/clones.hpp"
#include "colabmem/corpus.hpp"

namespace colabmem {

struct FunctionRecord {
  std::string signature;  // "def ..." through the terminating ':'
  std::optional<std::string> docstring;  // verbatim, delimiters included
  std::string body;
  std::string path;
  int start_line = 0;  // 1-based line of the def keyword
};

// Indentation-scoped scan for def/async def statements; one record per
// function, nested functions included.
std::vector<FunctionRecord> extract_functions(const SourceFile& file);

struct SurfaceCounts {
  int classes = 0;
  int functions = 0;
  int docstrings = 0;
};

SurfaceCounts count_surface(const SourceFile& file);
SurfaceCounts count_surface(const OrgCorpus& corpus);

enum class PromptKind { kFunction, kClonePrefix };

struct Prompt {
  std::string id;
  PromptKind kind = PromptKind::kFunction;
  std::string text;
  int token_len = 0;  // byte tokenizer: token count == byte count
  std::optional<std::string> expected_suffix;  // clone-prefix prompts only
  std::string origin_org;
};

// One prompt per documented function whose signature+docstring tokenizes
// within prompt_cap. Text is the verbatim source slice from the def line
// through the docstring's closing line.
std::vector<Prompt> build_function_prompts(const OrgCorpus& corpus,
                                           int prompt_cap);

// Uniform sample without replacement of round-half-up(fraction * N)
// prompts, in stable input order.
std::vector<Prompt> sample_prompts(const std::vector<Prompt>& prompts,
                                   double fraction, std::uint64_t seed);

// Rounding rule used by sample_prompts; exposed for the sampling arithmetic.
std::size_t sample_size(std::size_t n, double fraction);

// Each block is split at ceil(n/2) lines into prefix/suffix. Blocks whose
// prefix exceeds prompt_cap are divided into consecutive portions until
// every portion's prefix fits.
std::vector<Prompt> build_clone_prefix_prompts(
    const std::vector<CloneBlock>& blocks, int prompt_cap);

}  // namespace colabmem
