#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "colabmem/common.hpp"
#include "colabmem/tinylm.hpp"
#include "doctest.h"
#include "tmpdir.hpp"

using namespace colabmem;

namespace {

ArchConfig tiny_arch() {
  ArchConfig a;
  a.context_len = 16;
  a.d_model = 8;
  a.n_heads = 2;
  a.n_layers = 1;
  a.ffn_mult = 4;
  return a;
}

TokenBatch batch_of(const std::vector<std::vector<Token>>& rows) {
  TokenBatch b;
  b.rows = static_cast<int>(rows.size());
  b.cols = static_cast<int>(rows[0].size());
  for (const auto& r : rows) b.data.insert(b.data.end(), r.begin(), r.end());
  return b;
}

OrgCorpus corpus_of(const std::string& text) {
  return make_corpus("o", {make_source_file("a.py", text)});
}

}  // namespace

TEST_CASE("tokens are byte values and detokenize inverts them") {
  std::string all;
  for (int b = 0; b < 256; ++b) all.push_back(static_cast<char>(b));
  auto toks = tokenize(all);
  REQUIRE(toks.size() == 256);
  for (int b = 0; b < 256; ++b) CHECK(toks[b] == b);
  CHECK(detokenize(toks) == all);

  auto with_eot = toks;
  with_eot.push_back(kEndOfText);
  CHECK(detokenize(with_eot) == all);
  CHECK(tokenize("").empty());
}

TEST_CASE("the parameter count matches the flat layout arithmetic") {
  auto arch = tiny_arch();
  const std::size_t V = arch.vocab_size, T = arch.context_len,
                    C = arch.d_model, F = static_cast<std::size_t>(
                        arch.ffn_mult) * arch.d_model;
  std::size_t per_layer = C + C + C * 3 * C + 3 * C + C * C + C +  // attn
                          C + C + C * F + F + F * C + C;           // mlp
  std::size_t want = V * C + T * C + arch.n_layers * per_layer + C + C + C * V;
  CHECK(param_count_for(arch) == want);

  auto params = init_model(arch, 1);
  CHECK(params.weights.size() == want);
  CHECK(params.param_count() == want);

  std::size_t covered = 0;
  for (const auto& [name, seg] : param_groups(arch)) covered += seg.second;
  CHECK(covered == want);
}

TEST_CASE("initialization is seed deterministic with unit gains") {
  auto arch = tiny_arch();
  auto a = init_model(arch, 5);
  auto b = init_model(arch, 5);
  CHECK(a.weights == b.weights);
  auto c = init_model(arch, 6);
  CHECK(a.weights != c.weights);

  // ln1_g of layer 0 must be all ones.
  for (const auto& [name, seg] : param_groups(arch)) {
    if (name != "layer0.ln1_g") continue;
    for (std::size_t i = 0; i < seg.second; ++i) {
      CHECK(a.weights[seg.first + i] == 1.0f);
    }
  }
}

TEST_CASE("training windows cover each file in context sized chunks") {
  auto arch = tiny_arch();  // context_len 16, window stride 17
  std::string long_text(20, 'x');
  std::string short_text = "abc";
  std::string exact_text(16, 'y');  // 16 bytes + eot = 17, no remainder
  OrgCorpus corpus = make_corpus(
      "o", {make_source_file("l.py", long_text),
            make_source_file("s.py", short_text),
            make_source_file("x.py", exact_text)});
  auto windows = make_windows(corpus, arch.context_len);
  REQUIRE(windows.size() == 4);
  // Files sort by path: l.py then s.py then x.py.
  CHECK(windows[0].size() == 17);
  CHECK(windows[1].size() == 4);  // 20+1-17 = 4 token remainder
  CHECK(windows[1].back() == kEndOfText);
  CHECK(windows[2].size() == 4);  // "abc" + eot
  CHECK(windows[3].size() == 17);

  // A remainder below two tokens is dropped: 16-byte file fills exactly.
  OrgCorpus edge = corpus_of(std::string(16, 'q'));
  auto ew = make_windows(edge, arch.context_len);
  REQUIRE(ew.size() == 1);
  CHECK(ew[0].size() == 17);
}

TEST_CASE("logits at a position ignore later tokens") {
  auto params = init_model(tiny_arch(), 9);
  std::vector<Token> row = {10, 20, 30, 40, 50, 60};
  auto full = logits_all_positions(params, row);

  std::vector<Token> mutated = row;
  mutated[4] = 200;
  mutated[5] = 201;
  auto changed = logits_all_positions(params, mutated);

  const int V = params.arch.vocab_size;
  REQUIRE(full.size() == row.size() * static_cast<std::size_t>(V));
  for (int pos = 0; pos < 4; ++pos) {
    for (int v = 0; v < V; ++v) {
      REQUIRE(full[pos * V + v] == changed[pos * V + v]);
    }
  }
  bool later_differs = false;
  for (std::size_t i = 4 * V; i < full.size(); ++i) {
    if (full[i] != changed[i]) later_differs = true;
  }
  CHECK(later_differs);
}

TEST_CASE("analytic gradients match central differences in 64 bit") {
  auto arch = tiny_arch();
  auto params = init_model(arch, 13);
  std::vector<double> w(params.weights.begin(), params.weights.end());
  auto batch = batch_of({{5, 6, 7, 8, 9}, {100, 101, 102, 103, 104}});

  std::vector<double> grads;
  double base = loss_and_grad_f64(arch, w, batch, grads);
  REQUIRE(grads.size() == w.size());
  CHECK(base > 0.0);

  const double h = 1e-4;
  Rng rng(31);
  for (const auto& [name, seg] : param_groups(arch)) {
    CAPTURE(name);
    for (int probe = 0; probe < 3; ++probe) {
      std::size_t i = seg.first + rng.below(seg.second);
      double keep = w[i];
      w[i] = keep + h;
      double up = loss_f64(arch, w, batch);
      w[i] = keep - h;
      double down = loss_f64(arch, w, batch);
      w[i] = keep;
      double fd = (up - down) / (2 * h);
      double scale = std::max({std::abs(fd), std::abs(grads[i]), 1e-8});
      CHECK(std::abs(fd - grads[i]) / scale < 1e-4);
    }
  }
}

TEST_CASE("the float path agrees with the double path on the loss") {
  auto arch = tiny_arch();
  auto params = init_model(arch, 17);
  auto batch = batch_of({{1, 2, 3, 4, 5, 6}});
  auto fg = loss_and_grad(params, batch);
  std::vector<double> w(params.weights.begin(), params.weights.end());
  double d = loss_f64(arch, w, batch);
  CHECK(std::abs(fg.mean_nll - d) / d < 1e-3);
  REQUIRE(fg.grads.size() == params.weights.size());
}

TEST_CASE("all zero weights mean uniform logits and vocab sized perplexity") {
  auto arch = tiny_arch();
  ModelParams params;
  params.arch = arch;
  params.weights.assign(param_count_for(arch), 0.0f);
  double ppl = perplexity_text(params, "uniform probe text");
  CHECK(std::abs(ppl - arch.vocab_size) / arch.vocab_size < 1e-6);

  double corpus_ppl = perplexity(params, corpus_of("another probe"));
  CHECK(std::abs(corpus_ppl - arch.vocab_size) / arch.vocab_size < 1e-6);
}

TEST_CASE("nucleus candidates keep the smallest prefix plus boundary ties") {
  CHECK(nucleus_candidates({0.5, 0.3, 0.2}, 0.7) == std::vector<int>{0, 1});
  CHECK(nucleus_candidates({0.2, 0.5, 0.3}, 0.7) == std::vector<int>{1, 2});
  // 0.4 alone misses 0.5; adding one 0.3 reaches it, and the tied 0.3 rides
  // along.
  CHECK(nucleus_candidates({0.4, 0.3, 0.3}, 0.5) ==
        std::vector<int>{0, 1, 2});
  CHECK(nucleus_candidates({0.25, 0.25, 0.25, 0.25}, 0.2) ==
        std::vector<int>{0, 1, 2, 3});
  CHECK(nucleus_candidates({0.1, 0.7, 0.2}, 1.0) ==
        std::vector<int>{1, 2, 0});
  CHECK(nucleus_candidates({0.1, 0.7, 0.2}, 0.7) == std::vector<int>{1});
}

TEST_CASE("generation is seeded bounded and in vocabulary") {
  auto params = init_model(tiny_arch(), 3);
  SamplingConfig cfg;
  cfg.n_generations = 3;
  cfg.max_new_tokens = 6;
  cfg.seed = 77;
  std::vector<Token> prompt = tokenize("ab");

  auto out = generate(params, prompt, cfg);
  REQUIRE(out.size() == 3);
  for (const auto& s : out) {
    CHECK(s.size() <= 6);
    for (Token t : s) {
      CHECK(t >= 0);
      CHECK(t < params.arch.vocab_size);
      CHECK(t != kEndOfText);  // trimmed, never embedded
    }
  }

  auto again = generate(params, prompt, cfg);
  CHECK(out == again);
  cfg.seed = 78;
  auto other = generate(params, prompt, cfg);
  CHECK(out != other);

  cfg.seed = 77;
  cfg.max_new_tokens = 0;  // default: half the context
  auto capped = generate(params, prompt, cfg);
  for (const auto& s : capped) CHECK(s.size() <= 8);

  CHECK_THROWS_AS(generate(params, {}, cfg), Error);
  CHECK_THROWS_AS(generate(params, std::vector<Token>(9, 1), cfg), Error);
  std::vector<Token> bad = {1, 2, 999};
  CHECK_THROWS_AS(generate(params, bad, cfg), Error);
}

TEST_CASE("a few epochs on repetitive text reduce loss and perplexity") {
  auto arch = tiny_arch();
  auto params = init_model(arch, 21);
  std::string text;
  for (int i = 0; i < 30; ++i) text += "ab";
  OrgCorpus corpus = corpus_of(text);

  double before = perplexity(params, corpus);
  TrainHyper hyper;
  hyper.epochs = 5;
  hyper.lr = 1e-2;
  std::vector<EpochStats> stats;
  auto trained = train(params, corpus, hyper, 42, &stats);

  REQUIRE(stats.size() == 5);
  CHECK(stats.front().epoch == 1);
  CHECK(stats.back().epoch == 5);
  CHECK(stats.back().mean_nll < stats.front().mean_nll);
  CHECK(perplexity(trained, corpus) < before);
  CHECK(params.weights != trained.weights);  // input snapshot untouched

  auto trained2 = train(params, corpus, hyper, 42, nullptr);
  CHECK(trained.weights == trained2.weights);
}

TEST_CASE("malformed batches and configs are rejected") {
  auto arch = tiny_arch();
  auto params = init_model(arch, 2);

  TokenBatch empty;
  CHECK_THROWS_AS(loss_and_grad(params, empty), Error);

  auto long_row = batch_of({std::vector<Token>(18, 1)});
  CHECK_THROWS_AS(loss_and_grad(params, long_row), Error);

  auto bad_tok = batch_of({{1, 2, 400}});
  CHECK_THROWS_AS(loss_and_grad(params, bad_tok), Error);

  ArchConfig bad = arch;
  bad.n_heads = 3;  // 8 % 3 != 0
  CHECK_THROWS_AS(init_model(bad, 1), Error);

  TrainHyper hyper;
  hyper.epochs = 0;
  CHECK_THROWS_AS(train(params, corpus_of("xy"), hyper, 1), Error);

  ModelParams wrong = params;
  wrong.weights.pop_back();
  auto ok = batch_of({{1, 2, 3}});
  CHECK_THROWS_AS(loss_and_grad(wrong, ok), Error);
}

TEST_CASE("checkpoints restore the exact weights and architecture") {
  testutil::TmpDir tmp("tinylm-ckpt");
  auto params = init_model(tiny_arch(), 99);
  params.seed = 1234;
  auto path = tmp.path / "model.ckpt";
  save_checkpoint(path, params);

  auto loaded = load_checkpoint(path);
  CHECK(loaded.arch.vocab_size == params.arch.vocab_size);
  CHECK(loaded.arch.context_len == params.arch.context_len);
  CHECK(loaded.arch.d_model == params.arch.d_model);
  CHECK(loaded.arch.n_heads == params.arch.n_heads);
  CHECK(loaded.arch.n_layers == params.arch.n_layers);
  CHECK(loaded.arch.ffn_mult == params.arch.ffn_mult);
  CHECK(loaded.seed == params.seed);
  CHECK(loaded.weights == params.weights);

  CHECK_THROWS_AS(load_checkpoint(tmp.path / "absent.ckpt"), Error);
}
