#include "colabmem/collab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "colabmem/common.hpp"

namespace colabmem {

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kCentralized:
      return "centralized";
    case Strategy::kFedAvg:
      return "fedavg";
    case Strategy::kFedYogi:
      return "fedyogi";
    case Strategy::kIncremental:
      return "incremental";
  }
  return "centralized";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "centralized") return Strategy::kCentralized;
  if (name == "fedavg") return Strategy::kFedAvg;
  if (name == "fedyogi") return Strategy::kFedYogi;
  if (name == "incremental") return Strategy::kIncremental;
  throw Error("config", "unknown strategy: " + std::string(name));
}

TrainPlan default_plan(Strategy strategy, const ArchConfig& arch) {
  TrainPlan plan;
  plan.strategy = strategy;
  plan.arch = arch;
  if (strategy == Strategy::kFedAvg || strategy == Strategy::kFedYogi) {
    plan.rounds = 10;
    plan.local_epochs = 1;
  } else {
    plan.local_epochs = 10;
  }
  return plan;
}

std::string model_name(const TrainPlan& plan,
                       const std::vector<std::string>& org_ids) {
  auto joined = [](const std::vector<std::string>& ids, const char* sep) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) s += sep;
      s += ids[i];
    }
    return s;
  };
  switch (plan.strategy) {
    case Strategy::kCentralized:
      return "Centralized_" + joined(org_ids, "");
    case Strategy::kFedAvg:
      return "Federated_Avg_" + joined(org_ids, "");
    case Strategy::kFedYogi:
      return "Federated_Yogi_" + joined(org_ids, "");
    case Strategy::kIncremental:
      return "Incremental_" + joined(plan.order, "2");
  }
  return "";
}

std::string only_model_name(std::string_view org_id) {
  return std::string(org_id) + "_Only";
}

namespace {

void require_nonempty(const std::vector<OrgCorpus>& corpora,
                      std::size_t min_count, const char* what) {
  if (corpora.size() < min_count) {
    throw Error("train", std::string(what) + " needs >= " +
                             std::to_string(min_count) + " corpora");
  }
}

std::size_t window_tokens(const std::vector<std::vector<Token>>& windows) {
  std::size_t n = 0;
  for (const auto& w : windows) n += w.size();
  return n;
}

}  // namespace

ModelParams train_centralized(const std::vector<OrgCorpus>& corpora,
                              const TrainPlan& plan, std::uint64_t seed,
                              const TrainObserver* obs) {
  require_nonempty(corpora, 1, "centralized training");
  std::vector<std::vector<Token>> windows;
  for (const auto& c : corpora) {
    if (obs && obs->on_client_round) obs->on_client_round(0, c.org_id, c);
    auto w = make_windows(c, plan.arch.context_len);
    windows.insert(windows.end(), std::make_move_iterator(w.begin()),
                   std::make_move_iterator(w.end()));
  }
  if (windows.empty()) throw Error("train", "union of corpora is empty");
  ModelParams init = init_model(plan.arch, derive_seed(seed, {"model-init"}));
  TrainHyper hyper = plan.hyper;
  hyper.epochs = plan.local_epochs;
  return train(init, windows, hyper, derive_seed(seed, {"centralized"}));
}

ModelParams aggregate_fedavg(
    const std::vector<std::pair<ModelParams, double>>& clients) {
  if (clients.empty()) throw Error("aggregate", "no clients to aggregate");
  const ModelParams& first = clients.front().first;
  const std::size_t n = first.weights.size();
  double weight_sum = 0.0;
  for (const auto& [params, w] : clients) {
    const ArchConfig& a = params.arch;
    const ArchConfig& b = first.arch;
    if (a.vocab_size != b.vocab_size || a.context_len != b.context_len ||
        a.d_model != b.d_model || a.n_heads != b.n_heads ||
        a.n_layers != b.n_layers || a.ffn_mult != b.ffn_mult) {
      throw Error("aggregate", "client architecture mismatch");
    }
    if (w < 0.0) throw Error("aggregate", "negative client weight");
    weight_sum += w;
  }
  if (weight_sum <= 0.0) {
    throw Error("aggregate", "client weights sum to zero");
  }
  std::vector<double> acc(n, 0.0);
  for (const auto& [params, w] : clients) {
    for (std::size_t i = 0; i < n; ++i) {
      acc[i] += w * static_cast<double>(params.weights[i]);
    }
  }
  ModelParams out;
  out.arch = first.arch;
  out.seed = first.seed;
  out.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.weights[i] = static_cast<float>(acc[i] / weight_sum);
  }
  return out;
}

YogiState make_yogi_state(std::size_t param_count, double eta, double beta1,
                          double beta2, double tau) {
  YogiState s;
  s.eta = eta;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.tau = tau;
  s.m.assign(param_count, 0.0);
  s.v.assign(param_count, tau * tau);
  return s;
}

std::pair<ModelParams, YogiState> yogi_server_update(
    const YogiState& state, const ModelParams& current,
    const std::vector<double>& aggregated_delta) {
  const std::size_t n = current.weights.size();
  if (state.m.size() != n || state.v.size() != n ||
      aggregated_delta.size() != n) {
    throw Error("aggregate", "yogi state shape mismatch");
  }
  YogiState next = state;
  ModelParams out = current;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = aggregated_delta[i];
    const double d2 = d * d;
    next.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * d;
    const double diff = next.v[i] - d2;
    const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    next.v[i] = next.v[i] - (1.0 - state.beta2) * d2 * sign;
    out.weights[i] = static_cast<float>(
        static_cast<double>(current.weights[i]) +
        state.eta * next.m[i] / (std::sqrt(next.v[i]) + state.tau));
  }
  return {std::move(out), std::move(next)};
}

ModelParams train_federated(const std::vector<OrgCorpus>& corpora,
                            Strategy strategy, const TrainPlan& plan,
                            std::uint64_t seed, const TrainObserver* obs) {
  if (strategy != Strategy::kFedAvg && strategy != Strategy::kFedYogi) {
    throw Error("train", "train_federated expects fedavg or fedyogi");
  }
  require_nonempty(corpora, 2, "federated training");
  if (plan.rounds < 1) throw Error("config", "rounds must be >= 1");

  std::vector<std::vector<std::vector<Token>>> client_windows;
  client_windows.reserve(corpora.size());
  for (const auto& c : corpora) {
    client_windows.push_back(make_windows(c, plan.arch.context_len));
    if (client_windows.back().empty()) {
      throw Error("train", "corpus '" + c.org_id + "' has no token windows");
    }
  }

  ModelParams global = init_model(plan.arch, derive_seed(seed, {"model-init"}));
  YogiState yogi = make_yogi_state(global.weights.size());
  TrainHyper hyper = plan.hyper;
  hyper.epochs = plan.local_epochs;

  for (int round = 0; round < plan.rounds; ++round) {
    std::vector<std::pair<ModelParams, double>> clients;
    clients.reserve(corpora.size());
    for (std::size_t i = 0; i < corpora.size(); ++i) {
      if (obs && obs->on_client_round) {
        obs->on_client_round(round + 1, corpora[i].org_id, corpora[i]);
      }
      std::uint64_t client_seed = derive_seed(
          seed, {"round", std::to_string(round), corpora[i].org_id});
      ModelParams local = train(global, client_windows[i], hyper, client_seed);
      double w = plan.client_weights == ClientWeighting::kUniform
                     ? 1.0
                     : static_cast<double>(window_tokens(client_windows[i]));
      clients.emplace_back(std::move(local), w);
    }
    ModelParams averaged = aggregate_fedavg(clients);
    if (strategy == Strategy::kFedAvg) {
      global = std::move(averaged);
    } else {
      std::vector<double> delta(global.weights.size());
      for (std::size_t i = 0; i < delta.size(); ++i) {
        delta[i] = static_cast<double>(averaged.weights[i]) -
                   static_cast<double>(global.weights[i]);
      }
      auto [updated, next_state] = yogi_server_update(yogi, global, delta);
      global = std::move(updated);
      yogi = std::move(next_state);
    }
  }
  return global;
}

ModelParams train_incremental(const std::vector<OrgCorpus>& corpora,
                              const std::vector<std::string>& order,
                              const TrainPlan& plan, std::uint64_t seed,
                              const TrainObserver* obs) {
  require_nonempty(corpora, 1, "incremental training");
  std::set<std::string> available;
  for (const auto& c : corpora) available.insert(c.org_id);
  std::set<std::string> requested(order.begin(), order.end());
  if (order.empty() || requested.size() != order.size() ||
      requested != available) {
    throw Error("train",
                "incremental order must be a permutation of the org ids");
  }
  ModelParams params = init_model(plan.arch, derive_seed(seed, {"model-init"}));
  TrainHyper hyper = plan.hyper;
  hyper.epochs = plan.local_epochs;
  for (std::size_t stage = 0; stage < order.size(); ++stage) {
    const OrgCorpus* corpus = nullptr;
    for (const auto& c : corpora) {
      if (c.org_id == order[stage]) corpus = &c;
    }
    if (obs && obs->on_client_round) {
      obs->on_client_round(static_cast<int>(stage) + 1, corpus->org_id,
                           *corpus);
    }
    std::uint64_t stage_seed = derive_seed(
        seed, {"stage", std::to_string(stage), corpus->org_id});
    params = train(params, *corpus, hyper, stage_seed);
    if (obs && obs->on_stage_done) {
      obs->on_stage_done(static_cast<int>(stage) + 1, corpus->org_id, params);
    }
  }
  return params;
}

namespace {

void validate_model_name(const std::string& name) {
  if (name.empty()) throw Error("registry", "empty model name");
  for (char c : name) {
    bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
              (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) {
      throw Error("registry", "model name has unsupported characters: " + name);
    }
  }
}

}  // namespace

ModelRegistry::ModelRegistry(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

void ModelRegistry::put(const std::string& name, const ModelParams& params,
                        const std::string& provenance_json) {
  validate_model_name(name);
  save_checkpoint(dir_ / (name + ".ckpt"), params);
  std::filesystem::path meta = dir_ / (name + ".meta.json");
  std::filesystem::path tmp = meta;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + meta.string());
    out << provenance_json;
    if (!provenance_json.empty() && provenance_json.back() != '\n') out << "\n";
  }
  std::filesystem::rename(tmp, meta);
}

ModelParams ModelRegistry::get(const std::string& name) const {
  validate_model_name(name);
  std::filesystem::path p = dir_ / (name + ".ckpt");
  if (!std::filesystem::exists(p)) {
    throw Error("registry", "model not found: " + name);
  }
  return load_checkpoint(p);
}

std::string ModelRegistry::provenance(const std::string& name) const {
  validate_model_name(name);
  std::filesystem::path p = dir_ / (name + ".meta.json");
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("registry", "provenance not found: " + name);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
    text.pop_back();
  }
  return text;
}

bool ModelRegistry::has(const std::string& name) const {
  return std::filesystem::exists(dir_ / (name + ".ckpt"));
}

std::vector<std::string> ModelRegistry::list() const {
  std::vector<std::string> names;
  if (!std::filesystem::exists(dir_)) return names;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (!entry.is_regular_file()) continue;
    std::string fn = entry.path().filename().string();
    const std::string ext = ".ckpt";
    if (fn.size() > ext.size() &&
        fn.compare(fn.size() - ext.size(), ext.size(), ext) == 0) {
      names.push_back(fn.substr(0, fn.size() - ext.size()));
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace colabmem
