#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "colabmem/tinylm.hpp"

namespace colabmem {

struct PassAtKInput {
  int n = 0;  // samples per problem
  int c = 0;  // passing samples
  int k = 0;
};

// Unbiased estimator 1 - C(n-c, k)/C(n, k) in the overflow-safe product
// form prod_{i=n-c+1}^{n} (1 - k/i).
double pass_at_k(const PassAtKInput& input);

// Byte length of the UTF-8 text compressed as a raw DEFLATE stream (RFC
// 1951) at the default level.
std::size_t compression_entropy(std::string_view text);

struct MembershipScore {
  double log_ppl = 0.0;
  std::size_t compressed_bytes = 0;
  double ratio = 0.0;  // log_ppl / compressed_bytes
};

MembershipScore ppl_zlib_ratio(const ModelParams& model, std::string_view text);

}  // namespace colabmem
