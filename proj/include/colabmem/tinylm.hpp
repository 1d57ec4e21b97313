#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "colabmem/corpus.hpp"

namespace colabmem {

using Token = std::int32_t;
constexpr Token kEndOfText = 256;

// Byte-level tokenizer: token id == byte value, plus the end-of-text id.
std::vector<Token> tokenize(std::string_view text);
std::string detokenize(const std::vector<Token>& tokens);

struct ArchConfig {
  int vocab_size = 257;
  int context_len = 512;
  int d_model = 128;
  int n_heads = 4;
  int n_layers = 4;
  int ffn_mult = 4;

  int prompt_cap() const { return context_len / 2; }
};

std::size_t param_count_for(const ArchConfig& arch);

// Decoder-only transformer: learned positional embeddings, pre-norm blocks
// (causal self-attention, GELU MLP), layer-norm + linear head. Weights live
// in one flat array in this canonical order, matrices row-major [in, out]:
//   wte[V,C]  wpe[T,C]
//   per layer: ln1_g[C] ln1_b[C] w_qkv[C,3C] b_qkv[3C] w_ao[C,C] b_ao[C]
//              ln2_g[C] ln2_b[C] w_fc[C,F] b_fc[F] w_proj[F,C] b_proj[C]
//   lnf_g[C]  lnf_b[C]  w_head[C,V]
// (V vocab, T context, C d_model, F = ffn_mult*C; Q|K|V column blocks of
// w_qkv, heads occupying consecutive column slices within each block.)
struct ModelParams {
  ArchConfig arch;
  std::vector<float> weights;
  std::uint64_t seed = 0;

  std::size_t param_count() const { return weights.size(); }
};

// Gaussian(0, 0.02) matrices and embeddings, layer-norm gains 1, biases 0.
ModelParams init_model(const ArchConfig& arch, std::uint64_t seed);

// Equal-length rows; row layout [t0 .. tL]: inputs t0..t(L-1), targets
// t1..tL, so cols = window length and cols-1 = predicted positions.
struct TokenBatch {
  int rows = 0;
  int cols = 0;
  std::vector<Token> data;  // rows * cols

  Token at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

struct LossGrad {
  double mean_nll = 0.0;
  std::vector<float> grads;
};

LossGrad loss_and_grad(const ModelParams& params, const TokenBatch& batch);

// Forward-only token-weighted NLL, accumulated in 64-bit.
struct EvalResult {
  double nll_sum = 0.0;
  std::size_t tokens = 0;
};

EvalResult batch_nll(const ModelParams& params, const TokenBatch& batch);

// 64-bit end-to-end path for finite-difference verification.
double loss_f64(const ArchConfig& arch, const std::vector<double>& weights,
                const TokenBatch& batch);
double loss_and_grad_f64(const ArchConfig& arch,
                         const std::vector<double>& weights,
                         const TokenBatch& batch, std::vector<double>& grads);

// Named [offset, length) segments of the flat weight array, e.g. "wte",
// "layer0.w_qkv"; used to stratify checks across parameter groups.
std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>>
param_groups(const ArchConfig& arch);

// Logits for every position of one row; forward only.
std::vector<float> logits_all_positions(const ModelParams& params,
                                        const std::vector<Token>& row);

// Per-file token windows: tokenize(file) + end-of-text, cut into chunks of
// context_len+1 tokens; a trailing remainder is kept when >= 2 tokens.
std::vector<std::vector<Token>> make_windows(const OrgCorpus& corpus,
                                             int context_len);

struct TrainHyper {
  int epochs = 10;
  int batch_size = 2;
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct EpochStats {
  int epoch = 0;  // counts from 1
  double mean_nll = 0.0;
};

// Adam over seeded-shuffled windows; optimizer state is created fresh for
// every call. Returns the updated snapshot; `params` is untouched.
ModelParams train(const ModelParams& params,
                  const std::vector<std::vector<Token>>& windows,
                  const TrainHyper& hyper, std::uint64_t seed,
                  std::vector<EpochStats>* stats = nullptr);
ModelParams train(const ModelParams& params, const OrgCorpus& corpus,
                  const TrainHyper& hyper, std::uint64_t seed,
                  std::vector<EpochStats>* stats = nullptr);

struct SamplingConfig {
  double temperature = 0.6;
  double top_p = 0.6;
  int n_generations = 5;
  int max_new_tokens = 0;  // 0: use context_len/2
  std::uint64_t seed = 0;
};

// Nucleus sampling with a KV cache; returns newly generated tokens only
// (prompt excluded, end-of-text trimmed). Sample s draws from a generator
// seeded by (cfg.seed, s).
std::vector<std::vector<Token>> generate(const ModelParams& params,
                                         const std::vector<Token>& prompt,
                                         const SamplingConfig& cfg);

// Indices kept by a top-p filter: probabilities sorted descending, the
// smallest prefix reaching top_p, plus all ties at the boundary value.
std::vector<int> nucleus_candidates(const std::vector<double>& probs,
                                    double top_p);

// exp(token-weighted mean next-token NLL) over the corpus windows.
double perplexity(const ModelParams& params, const OrgCorpus& corpus);
double perplexity_text(const ModelParams& params, std::string_view text);

void save_checkpoint(const std::filesystem::path& path,
                     const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace colabmem
