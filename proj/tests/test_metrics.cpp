#include <cmath>
#include <string>

#include "colabmem/common.hpp"
#include "colabmem/metrics.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace colabmem;

TEST_CASE("pass at k matches exhaustive enumeration for small n") {
  for (int n = 1; n <= 8; ++n) {
    for (int c = 0; c <= n; ++c) {
      for (int k = 1; k <= n; ++k) {
        CAPTURE(n);
        CAPTURE(c);
        CAPTURE(k);
        double got = pass_at_k({n, c, k});
        double want = oracle::passk_enumeration(n, c, k);
        CHECK(std::abs(got - want) < 1e-12);
      }
    }
  }
}

TEST_CASE("pass at k saturates when failures cannot fill a sample") {
  CHECK(pass_at_k({10, 10, 1}) == 1.0);
  CHECK(pass_at_k({10, 5, 6}) == 1.0);   // n - c = 5 < k
  CHECK(pass_at_k({200, 200, 100}) == 1.0);
  CHECK(pass_at_k({10, 0, 5}) == 0.0);
}

TEST_CASE("pass at k stays near the monte carlo estimate at n 200") {
  for (int c : {0, 10, 50, 200}) {
    for (int k : {1, 10, 100}) {
      CAPTURE(c);
      CAPTURE(k);
      double closed = pass_at_k({200, c, k});
      double mc = oracle::passk_monte_carlo(
          200, c, k, 20000, derive_seed(9, {std::to_string(c), "x",
                                            std::to_string(k)}));
      CHECK(std::abs(closed - mc) < 0.02);
    }
  }
}

TEST_CASE("pass at k validates its arguments") {
  CHECK_THROWS_AS(pass_at_k({0, 0, 1}), Error);
  CHECK_THROWS_AS(pass_at_k({10, 11, 1}), Error);
  CHECK_THROWS_AS(pass_at_k({10, -1, 1}), Error);
  CHECK_THROWS_AS(pass_at_k({10, 5, 0}), Error);
  CHECK_THROWS_AS(pass_at_k({10, 5, 11}), Error);
}

TEST_CASE("compression entropy grows with information content") {
  std::string repetitive(4000, 'a');
  std::string mixed;
  Rng rng(123);
  for (int i = 0; i < 4000; ++i) {
    mixed.push_back(static_cast<char>('a' + rng.below(26)));
  }
  std::size_t rep = compression_entropy(repetitive);
  std::size_t rnd = compression_entropy(mixed);
  CHECK(rep < rnd);
  CHECK(rep < repetitive.size() / 10);
  CHECK(rnd <= mixed.size() + 64);

  CHECK(compression_entropy("x") > 0);
  CHECK_THROWS_AS(compression_entropy(""), Error);
}

TEST_CASE("compression entropy is deterministic for equal inputs") {
  std::string text = "def f():\n    return 42\n";
  CHECK(compression_entropy(text) == compression_entropy(text));
}

TEST_CASE("the membership score combines perplexity and compressed size") {
  ArchConfig arch;
  arch.context_len = 16;
  arch.d_model = 8;
  arch.n_heads = 2;
  arch.n_layers = 1;
  ModelParams uniform;
  uniform.arch = arch;
  uniform.weights.assign(param_count_for(arch), 0.0f);

  std::string text = "some sample text for scoring";
  auto score = ppl_zlib_ratio(uniform, text);
  CHECK(score.log_ppl ==
        doctest::Approx(std::log(arch.vocab_size)).epsilon(1e-6));
  CHECK(score.compressed_bytes == compression_entropy(text));
  CHECK(score.ratio ==
        doctest::Approx(score.log_ppl /
                        static_cast<double>(score.compressed_bytes)));
}
