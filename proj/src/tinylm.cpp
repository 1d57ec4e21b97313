#include "colabmem/tinylm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>

#include "colabmem/common.hpp"
#include "tinylm_model.hpp"

namespace colabmem {

using detail::Layout;

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(static_cast<Token>(c));
  return out;
}

std::string detokenize(const std::vector<Token>& tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (Token t : tokens) {
    if (t >= 0 && t < 256) out.push_back(static_cast<char>(t));
  }
  return out;
}

namespace {

void validate_arch(const ArchConfig& a) {
  if (a.vocab_size < 2 || a.context_len < 2 || a.d_model < 1 ||
      a.n_heads < 1 || a.n_layers < 1 || a.ffn_mult < 1) {
    throw Error("config", "invalid model architecture");
  }
  if (a.d_model % a.n_heads != 0) {
    throw Error("config", "d_model must be divisible by n_heads");
  }
}

void validate_params(const ModelParams& params) {
  validate_arch(params.arch);
  std::size_t want = Layout(params.arch).total;
  if (params.weights.size() != want) {
    throw Error("model", "weight count does not match the architecture");
  }
}

void validate_batch(const ArchConfig& arch, const TokenBatch& batch) {
  if (batch.rows < 1 || batch.cols < 2) {
    throw Error("model", "batch must have >= 1 row and >= 2 columns");
  }
  if (batch.cols - 1 > arch.context_len) {
    throw Error("model", "batch row exceeds context_len");
  }
  if (batch.data.size() !=
      static_cast<std::size_t>(batch.rows) * batch.cols) {
    throw Error("model", "batch data size mismatch");
  }
  for (Token t : batch.data) {
    if (t < 0 || t >= arch.vocab_size) {
      throw Error("model", "token id out of range");
    }
  }
}

}  // namespace

std::size_t param_count_for(const ArchConfig& arch) {
  validate_arch(arch);
  return Layout(arch).total;
}

ModelParams init_model(const ArchConfig& arch, std::uint64_t seed) {
  validate_arch(arch);
  Layout lay(arch);
  ModelParams p;
  p.arch = arch;
  p.seed = seed;
  p.weights.assign(lay.total, 0.0f);
  Rng rng(derive_seed(seed, {"init"}));
  auto gauss = [&](std::size_t off, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      p.weights[off + i] = static_cast<float>(rng.normal(0.0, 0.02));
    }
  };
  auto ones = [&](std::size_t off, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p.weights[off + i] = 1.0f;
  };
  const std::size_t C = lay.C, F = lay.F;
  gauss(lay.wte, static_cast<std::size_t>(lay.V) * C);
  gauss(lay.wpe, static_cast<std::size_t>(lay.T) * C);
  for (const auto& l : lay.layers) {
    ones(l.ln1_g, C);
    gauss(l.w_qkv, C * 3 * C);
    gauss(l.w_ao, C * C);
    ones(l.ln2_g, C);
    gauss(l.w_fc, C * F);
    gauss(l.w_proj, F * C);
  }
  ones(lay.lnf_g, C);
  gauss(lay.w_head, C * static_cast<std::size_t>(lay.V));
  return p;
}

LossGrad loss_and_grad(const ModelParams& params, const TokenBatch& batch) {
  validate_params(params);
  validate_batch(params.arch, batch);
  Layout lay(params.arch);
  detail::Activations<float> acts;
  detail::model_forward<float>(lay, params.weights.data(), batch, acts);
  detail::Mat<float> dlogits;
  LossGrad out;
  out.mean_nll = detail::xent_loss<float>(acts.logits, batch, &dlogits);
  out.grads.assign(lay.total, 0.0f);
  detail::model_backward<float>(lay, params.weights.data(), batch, acts,
                                dlogits, out.grads.data());
  return out;
}

EvalResult batch_nll(const ModelParams& params, const TokenBatch& batch) {
  validate_params(params);
  validate_batch(params.arch, batch);
  Layout lay(params.arch);
  detail::Activations<float> acts;
  detail::model_forward<float>(lay, params.weights.data(), batch, acts);
  EvalResult r;
  double mean =
      detail::xent_loss<float>(acts.logits, batch, nullptr);
  r.tokens = static_cast<std::size_t>(batch.rows) * (batch.cols - 1);
  r.nll_sum = mean * static_cast<double>(r.tokens);
  return r;
}

double loss_f64(const ArchConfig& arch, const std::vector<double>& weights,
                const TokenBatch& batch) {
  validate_batch(arch, batch);
  Layout lay(arch);
  if (weights.size() != lay.total) {
    throw Error("model", "weight vector size mismatch");
  }
  detail::Activations<double> acts;
  detail::model_forward<double>(lay, weights.data(), batch, acts);
  return detail::xent_loss<double>(acts.logits, batch, nullptr);
}

double loss_and_grad_f64(const ArchConfig& arch,
                         const std::vector<double>& weights,
                         const TokenBatch& batch, std::vector<double>& grads) {
  validate_batch(arch, batch);
  Layout lay(arch);
  if (weights.size() != lay.total) {
    throw Error("model", "weight vector size mismatch");
  }
  detail::Activations<double> acts;
  detail::model_forward<double>(lay, weights.data(), batch, acts);
  detail::Mat<double> dlogits;
  double loss = detail::xent_loss<double>(acts.logits, batch, &dlogits);
  grads.assign(lay.total, 0.0);
  detail::model_backward<double>(lay, weights.data(), batch, acts, dlogits,
                                 grads.data());
  return loss;
}

std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>>
param_groups(const ArchConfig& arch) {
  Layout lay(arch);
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> out;
  const std::size_t C = lay.C, F = lay.F;
  out.push_back({"wte", {lay.wte, static_cast<std::size_t>(lay.V) * C}});
  out.push_back({"wpe", {lay.wpe, static_cast<std::size_t>(lay.T) * C}});
  for (int l = 0; l < lay.L; ++l) {
    const auto& pl = lay.layers[l];
    std::string prefix = "layer" + std::to_string(l) + ".";
    out.push_back({prefix + "ln1_g", {pl.ln1_g, C}});
    out.push_back({prefix + "ln1_b", {pl.ln1_b, C}});
    out.push_back({prefix + "w_qkv", {pl.w_qkv, C * 3 * C}});
    out.push_back({prefix + "b_qkv", {pl.b_qkv, 3 * C}});
    out.push_back({prefix + "w_ao", {pl.w_ao, C * C}});
    out.push_back({prefix + "b_ao", {pl.b_ao, C}});
    out.push_back({prefix + "ln2_g", {pl.ln2_g, C}});
    out.push_back({prefix + "ln2_b", {pl.ln2_b, C}});
    out.push_back({prefix + "w_fc", {pl.w_fc, C * F}});
    out.push_back({prefix + "b_fc", {pl.b_fc, F}});
    out.push_back({prefix + "w_proj", {pl.w_proj, F * C}});
    out.push_back({prefix + "b_proj", {pl.b_proj, C}});
  }
  out.push_back({"lnf_g", {lay.lnf_g, C}});
  out.push_back({"lnf_b", {lay.lnf_b, C}});
  out.push_back({"w_head", {lay.w_head, C * static_cast<std::size_t>(lay.V)}});
  return out;
}

std::vector<float> logits_all_positions(const ModelParams& params,
                                        const std::vector<Token>& row) {
  validate_params(params);
  if (row.empty()) throw Error("model", "empty row");
  TokenBatch batch;
  batch.rows = 1;
  batch.cols = static_cast<int>(row.size()) + 1;
  batch.data = row;
  batch.data.push_back(0);  // unread target slot
  validate_batch(params.arch, batch);
  Layout lay(params.arch);
  detail::Activations<float> acts;
  detail::model_forward<float>(lay, params.weights.data(), batch, acts);
  std::vector<float> out(acts.logits.size());
  for (int r = 0; r < acts.logits.rows(); ++r) {
    for (int v = 0; v < acts.logits.cols(); ++v) {
      out[static_cast<std::size_t>(r) * lay.V + v] = acts.logits(r, v);
    }
  }
  return out;
}

std::vector<std::vector<Token>> make_windows(const OrgCorpus& corpus,
                                             int context_len) {
  std::vector<std::vector<Token>> windows;
  const std::size_t w = static_cast<std::size_t>(context_len) + 1;
  for (const auto& f : corpus.files) {
    std::vector<Token> toks = tokenize(f.text);
    toks.push_back(kEndOfText);
    for (std::size_t at = 0; at < toks.size(); at += w) {
      std::size_t end = std::min(at + w, toks.size());
      if (end - at < 2) break;
      windows.emplace_back(toks.begin() + at, toks.begin() + end);
    }
  }
  return windows;
}

namespace {

TokenBatch pack_batch(const std::vector<std::vector<Token>>& windows,
                      const std::vector<std::size_t>& idx, std::size_t begin,
                      std::size_t end) {
  TokenBatch b;
  b.rows = static_cast<int>(end - begin);
  b.cols = static_cast<int>(windows[idx[begin]].size());
  b.data.reserve(static_cast<std::size_t>(b.rows) * b.cols);
  for (std::size_t i = begin; i < end; ++i) {
    const auto& w = windows[idx[i]];
    b.data.insert(b.data.end(), w.begin(), w.end());
  }
  return b;
}

}  // namespace

ModelParams train(const ModelParams& params,
                  const std::vector<std::vector<Token>>& windows,
                  const TrainHyper& hyper, std::uint64_t seed,
                  std::vector<EpochStats>* stats) {
  validate_params(params);
  if (windows.empty()) throw Error("train", "empty training dataset");
  if (hyper.epochs < 1 || hyper.batch_size < 1) {
    throw Error("config", "epochs and batch_size must be >= 1");
  }
  Layout lay(params.arch);
  ModelParams out = params;
  long step = 0;

  // Rows of one batch must share a length, so windows are bucketed by
  // length; batches never span buckets. Bucket contents and the batch
  // order are reshuffled every epoch.
  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    buckets[windows[i].size()].push_back(i);
  }

  detail::Activations<float> acts;
  detail::Mat<float> dlogits;
  // The optimizer state lives in Eigen-owned (hence aligned) arrays: Eigen
  // peels vectorized assignments to a start chosen from the runtime pointer
  // alignment, and the scalar head rounds a*b+c differently from the fused
  // vector body, so updating std::vector storage in place would make the
  // trained weights depend on where the heap happened to place it.
  const Eigen::Index n = static_cast<Eigen::Index>(lay.total);
  Eigen::ArrayXf wA(n), mA(n), vA(n), gA(n);
  std::copy(out.weights.begin(), out.weights.end(), wA.data());
  mA.setZero();
  vA.setZero();

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Rng rng(derive_seed(seed, {"epoch", std::to_string(epoch)}));
    struct BatchRef {
      std::size_t len;
      std::size_t begin, end;
    };
    std::vector<BatchRef> refs;
    for (auto& [len, idx] : buckets) {
      rng.shuffle(idx);
      for (std::size_t at = 0; at < idx.size();
           at += static_cast<std::size_t>(hyper.batch_size)) {
        refs.push_back({len, at,
                        std::min(at + static_cast<std::size_t>(hyper.batch_size),
                                 idx.size())});
      }
    }
    rng.shuffle(refs);

    double nll_sum = 0.0;
    std::size_t token_count = 0;
    for (const auto& ref : refs) {
      TokenBatch batch = pack_batch(windows, buckets[ref.len], ref.begin, ref.end);
      detail::model_forward<float>(lay, wA.data(), batch, acts);
      double mean_nll = detail::xent_loss<float>(acts.logits, batch, &dlogits);
      detail::model_backward<float>(lay, wA.data(), batch, acts, dlogits,
                                    gA.data());
      std::size_t toks = static_cast<std::size_t>(batch.rows) * (batch.cols - 1);
      nll_sum += mean_nll * static_cast<double>(toks);
      token_count += toks;

      ++step;
      const float b1 = static_cast<float>(hyper.beta1);
      const float b2 = static_cast<float>(hyper.beta2);
      const float c1 =
          1.0f - static_cast<float>(std::pow(hyper.beta1, static_cast<double>(step)));
      const float c2 =
          1.0f - static_cast<float>(std::pow(hyper.beta2, static_cast<double>(step)));
      const float lr = static_cast<float>(hyper.lr);
      const float eps = static_cast<float>(hyper.eps);
      mA = b1 * mA + (1.0f - b1) * gA;
      vA = b2 * vA + (1.0f - b2) * gA.square();
      wA -= lr * (mA / c1) / ((vA / c2).sqrt() + eps);
    }
    if (stats) {
      stats->push_back({epoch + 1, token_count
                                         ? nll_sum / static_cast<double>(token_count)
                                         : 0.0});
    }
  }
  std::copy(wA.data(), wA.data() + lay.total, out.weights.begin());
  return out;
}

ModelParams train(const ModelParams& params, const OrgCorpus& corpus,
                  const TrainHyper& hyper, std::uint64_t seed,
                  std::vector<EpochStats>* stats) {
  return train(params, make_windows(corpus, params.arch.context_len), hyper,
               seed, stats);
}

std::vector<int> nucleus_candidates(const std::vector<double>& probs,
                                    double top_p) {
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return a < b;
  });
  double cum = 0.0;
  std::size_t keep = 0;
  while (keep < order.size()) {
    cum += probs[order[keep]];
    ++keep;
    if (cum >= top_p) break;
  }
  // Ties at the boundary probability are all included.
  while (keep < order.size() &&
         probs[order[keep]] == probs[order[keep - 1]]) {
    ++keep;
  }
  order.resize(keep);
  return order;
}

std::vector<std::vector<Token>> generate(const ModelParams& params,
                                         const std::vector<Token>& prompt,
                                         const SamplingConfig& cfg) {
  const ArchConfig& arch = params.arch;
  validate_params(params);
  if (prompt.empty()) throw Error("generate", "empty prompt");
  if (static_cast<int>(prompt.size()) > arch.prompt_cap()) {
    throw Error("generate", "prompt exceeds cap of " +
                                std::to_string(arch.prompt_cap()) + " tokens");
  }
  for (Token t : prompt) {
    if (t < 0 || t >= arch.vocab_size) {
      throw Error("generate", "prompt token out of range");
    }
  }
  if (cfg.n_generations < 1) throw Error("config", "n_generations must be >= 1");
  if (!(cfg.top_p > 0.0 && cfg.top_p <= 1.0)) {
    throw Error("config", "top_p must lie in (0, 1]");
  }
  if (cfg.temperature < 0.0) throw Error("config", "temperature must be >= 0");
  int max_new = cfg.max_new_tokens > 0 ? cfg.max_new_tokens
                                       : arch.context_len / 2;
  max_new = std::min(max_new,
                     arch.context_len - static_cast<int>(prompt.size()));
  const bool greedy = cfg.temperature < 1e-6;

  std::vector<std::vector<Token>> samples;
  samples.reserve(cfg.n_generations);
  const float* w = params.weights.data();
  std::vector<double> probs(arch.vocab_size);
  for (int s = 0; s < cfg.n_generations; ++s) {
    Rng rng(derive_seed(cfg.seed, {"gen", std::to_string(s)}));
    detail::GenState<float> state(arch);
    detail::Vec<float> logits;
    for (std::size_t i = 0; i + 1 < prompt.size(); ++i) {
      state.step(w, prompt[i]);
    }
    logits = state.step(w, prompt.back());
    std::vector<Token> out;
    for (int n = 0; n < max_new; ++n) {
      Token next;
      if (greedy) {
        int best = 0;
        for (int v = 1; v < arch.vocab_size; ++v) {
          if (logits[v] > logits[best]) best = v;
        }
        next = best;
      } else {
        double m = -1e300;
        for (int v = 0; v < arch.vocab_size; ++v) {
          m = std::max(m, static_cast<double>(logits[v]) / cfg.temperature);
        }
        double sum = 0.0;
        for (int v = 0; v < arch.vocab_size; ++v) {
          probs[v] =
              std::exp(static_cast<double>(logits[v]) / cfg.temperature - m);
          sum += probs[v];
        }
        for (auto& p : probs) p /= sum;
        std::vector<int> kept = nucleus_candidates(probs, cfg.top_p);
        double kept_mass = 0.0;
        for (int v : kept) kept_mass += probs[v];
        double u = rng.uniform01() * kept_mass;
        double cum = 0.0;
        next = kept.back();
        for (int v : kept) {
          cum += probs[v];
          if (u < cum) {
            next = v;
            break;
          }
        }
      }
      if (next == kEndOfText) break;
      out.push_back(next);
      if (n + 1 < max_new) logits = state.step(w, next);
    }
    samples.push_back(std::move(out));
  }
  return samples;
}

namespace {

EvalResult corpus_nll(const ModelParams& params,
                      const std::vector<std::vector<Token>>& windows) {
  if (windows.empty()) throw Error("perplexity", "no token windows");
  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    buckets[windows[i].size()].push_back(i);
  }
  EvalResult total;
  constexpr std::size_t kEvalBatch = 8;
  for (const auto& [len, idx] : buckets) {
    for (std::size_t at = 0; at < idx.size(); at += kEvalBatch) {
      std::size_t end = std::min(at + kEvalBatch, idx.size());
      TokenBatch b = pack_batch(windows, idx, at, end);
      EvalResult r = batch_nll(params, b);
      total.nll_sum += r.nll_sum;
      total.tokens += r.tokens;
    }
  }
  return total;
}

}  // namespace

double perplexity(const ModelParams& params, const OrgCorpus& corpus) {
  EvalResult r = corpus_nll(params, make_windows(corpus, params.arch.context_len));
  return std::exp(r.nll_sum / static_cast<double>(r.tokens));
}

double perplexity_text(const ModelParams& params, std::string_view text) {
  if (text.empty()) throw Error("perplexity", "empty text");
  std::vector<Token> toks = tokenize(text);
  toks.push_back(kEndOfText);
  std::vector<std::vector<Token>> windows;
  const std::size_t w = static_cast<std::size_t>(params.arch.context_len) + 1;
  for (std::size_t at = 0; at < toks.size(); at += w) {
    std::size_t end = std::min(at + w, toks.size());
    if (end - at < 2) break;
    windows.emplace_back(toks.begin() + at, toks.begin() + end);
  }
  EvalResult r = corpus_nll(params, windows);
  return std::exp(r.nll_sum / static_cast<double>(r.tokens));
}

namespace {

constexpr char kCheckpointMagic[4] = {'T', 'L', 'M', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const ModelParams& params) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write checkpoint: " + path.string());
    out.write(kCheckpointMagic, 4);
    write_pod(out, kCheckpointVersion);
    std::int32_t a[6] = {params.arch.vocab_size, params.arch.context_len,
                         params.arch.d_model, params.arch.n_heads,
                         params.arch.n_layers, params.arch.ffn_mult};
    out.write(reinterpret_cast<const char*>(a), sizeof(a));
    write_pod(out, params.seed);
    std::uint64_t count = params.weights.size();
    write_pod(out, count);
    out.write(reinterpret_cast<const char*>(params.weights.data()),
              static_cast<std::streamsize>(count * sizeof(float)));
    if (!out) throw Error("io", "short write: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot read checkpoint: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw Error("io", "not a checkpoint file: " + path.string());
  }
  std::uint32_t version = 0;
  read_pod(in, version);
  if (version != kCheckpointVersion) {
    throw Error("io", "unsupported checkpoint version");
  }
  std::int32_t a[6];
  in.read(reinterpret_cast<char*>(a), sizeof(a));
  ModelParams p;
  p.arch = {a[0], a[1], a[2], a[3], a[4], a[5]};
  read_pod(in, p.seed);
  std::uint64_t count = 0;
  read_pod(in, count);
  if (count != param_count_for(p.arch)) {
    throw Error("io", "checkpoint parameter count mismatch");
  }
  p.weights.resize(count);
  in.read(reinterpret_cast<char*>(p.weights.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw Error("io", "truncated checkpoint: " + path.string());
  return p;
}

}  // namespace colabmem
