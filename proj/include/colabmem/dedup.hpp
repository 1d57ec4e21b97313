#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "colabmem/corpus.hpp"

namespace colabmem {

struct MinHashSignature {
  std::vector<std::uint64_t> values;  // length == num_permutations
  std::uint32_t num_permutations = 0;
  std::uint64_t seed = 0;
};

// Hashes of all k-grams over the whitespace token stream, sorted and unique.
// Fewer than k tokens yields an empty set.
std::vector<std::uint64_t> shingles(std::string_view text, int k);

MinHashSignature signature(const std::vector<std::uint64_t>& shingle_set,
                           int num_perm, std::uint64_t seed);

// Fraction of matching signature positions.
double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b);

// Exact Jaccard of two shingle sets; the oracle the estimator approximates.
double exact_jaccard(const std::vector<std::uint64_t>& a,
                     const std::vector<std::uint64_t>& b);

// Bands b and rows r with b*r == num_perm whose LSH curve threshold
// (1/b)^(1/r) sits closest to the requested similarity threshold.
std::pair<int, int> choose_bands(int num_perm, double threshold);

struct DuplicateGroup {
  std::string kept_path;
  std::vector<std::string> dropped_paths;
};

struct DedupOptions {
  double threshold = 0.85;
  int num_perm = 128;
  int shingle_k = 5;
  std::uint64_t seed = 0;
};

// LSH-bucketed near-duplicate removal. Candidate pairs are verified with
// estimate_jaccard >= threshold; each verified group keeps its
// lexicographically first path. File order of the result matches the input.
std::pair<OrgCorpus, std::vector<DuplicateGroup>> lsh_dedup(
    const OrgCorpus& corpus, const DedupOptions& opts);

}  // namespace colabmem
