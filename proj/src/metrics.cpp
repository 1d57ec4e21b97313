#include "colabmem/metrics.hpp"

#include <cmath>
#include <zlib.h>

#include "colabmem/common.hpp"

namespace colabmem {

double pass_at_k(const PassAtKInput& input) {
  const int n = input.n, c = input.c, k = input.k;
  if (n < 1) throw Error("metrics", "pass@k requires n >= 1");
  if (c < 0 || c > n) throw Error("metrics", "pass@k requires 0 <= c <= n");
  if (k < 1 || k > n) throw Error("metrics", "pass@k requires 1 <= k <= n");
  if (n - c < k) return 1.0;
  double fail = 1.0;
  for (int i = n - c + 1; i <= n; ++i) {
    fail *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
  }
  return 1.0 - fail;
}

std::size_t compression_entropy(std::string_view text) {
  if (text.empty()) throw Error("metrics", "cannot compress empty text");
  z_stream zs{};
  // windowBits < 0 selects a raw DEFLATE stream without zlib framing.
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -15, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error("metrics", "deflateInit2 failed");
  }
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(text.data()));
  zs.avail_in = static_cast<uInt>(text.size());
  std::size_t total = 0;
  unsigned char buf[1 << 14];
  int rc;
  do {
    zs.next_out = buf;
    zs.avail_out = sizeof(buf);
    rc = deflate(&zs, Z_FINISH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      deflateEnd(&zs);
      throw Error("metrics", "deflate failed");
    }
    total += sizeof(buf) - zs.avail_out;
  } while (rc != Z_STREAM_END);
  deflateEnd(&zs);
  return total;
}

MembershipScore ppl_zlib_ratio(const ModelParams& model,
                               std::string_view text) {
  MembershipScore score;
  score.log_ppl = std::log(perplexity_text(model, text));
  score.compressed_bytes = compression_entropy(text);
  score.ratio = score.log_ppl / static_cast<double>(score.compressed_bytes);
  return score;
}

}  // namespace colabmem
