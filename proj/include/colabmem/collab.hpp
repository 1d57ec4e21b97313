#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "colabmem/corpus.hpp"
#include "colabmem/tinylm.hpp"

namespace colabmem {

enum class Strategy { kCentralized, kFedAvg, kFedYogi, kIncremental };

std::string_view strategy_name(Strategy s);
Strategy parse_strategy(std::string_view name);

enum class ClientWeighting { kUniform, kBySize };

struct TrainPlan {
  Strategy strategy = Strategy::kCentralized;
  ArchConfig arch;
  std::vector<std::string> order;  // incremental only
  int rounds = 10;                 // federated only
  // Centralized: total epochs; federated: epochs per round; incremental:
  // epochs per stage.
  int local_epochs = 10;
  ClientWeighting client_weights = ClientWeighting::kBySize;
  TrainHyper hyper;
};

// The paper's per-strategy defaults: 10 epochs for centralized and per
// incremental stage, 10 rounds x 1 local epoch for federated.
TrainPlan default_plan(Strategy strategy, const ArchConfig& arch);

// Registry names: Centralized_ABC, Federated_Avg_ABC, Federated_Yogi_ABC,
// Incremental_A2B2C (order joined by "2"), A_Only.
std::string model_name(const TrainPlan& plan,
                       const std::vector<std::string>& org_ids);
std::string only_model_name(std::string_view org_id);

// Called once per (round, client) with the corpus the client trained on;
// rounds and stages count from 1. Lets tests audit data isolation and
// stage snapshots.
struct TrainObserver {
  std::function<void(int round, const std::string& org_id,
                     const OrgCorpus& corpus)>
      on_client_round;
  std::function<void(int stage, const std::string& org_id,
                     const ModelParams& params)>
      on_stage_done;
};

ModelParams train_centralized(const std::vector<OrgCorpus>& corpora,
                              const TrainPlan& plan, std::uint64_t seed,
                              const TrainObserver* obs = nullptr);

// Convex combination sum(w_i * theta_i) / sum(w_i), accumulated in 64-bit.
ModelParams aggregate_fedavg(
    const std::vector<std::pair<ModelParams, double>>& clients);

struct YogiState {
  std::vector<double> m;  // init 0
  std::vector<double> v;  // init tau^2
  double eta = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double tau = 1e-3;
};

YogiState make_yogi_state(std::size_t param_count, double eta = 1e-2,
                          double beta1 = 0.9, double beta2 = 0.99,
                          double tau = 1e-3);

// Per coordinate: m <- b1*m + (1-b1)*d; v <- v - (1-b2)*d^2*sign(v - d^2);
// theta <- theta + eta*m/(sqrt(v) + tau).
std::pair<ModelParams, YogiState> yogi_server_update(
    const YogiState& state, const ModelParams& current,
    const std::vector<double>& aggregated_delta);

ModelParams train_federated(const std::vector<OrgCorpus>& corpora,
                            Strategy strategy, const TrainPlan& plan,
                            std::uint64_t seed,
                            const TrainObserver* obs = nullptr);

ModelParams train_incremental(const std::vector<OrgCorpus>& corpora,
                              const std::vector<std::string>& order,
                              const TrainPlan& plan, std::uint64_t seed,
                              const TrainObserver* obs = nullptr);

// Directory of named checkpoints, one .ckpt plus one .meta.json sidecar per
// model.
class ModelRegistry {
 public:
  explicit ModelRegistry(std::filesystem::path dir);

  void put(const std::string& name, const ModelParams& params,
           const std::string& provenance_json);
  ModelParams get(const std::string& name) const;
  std::string provenance(const std::string& name) const;
  bool has(const std::string& name) const;
  std::vector<std::string> list() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

}  // namespace colabmem
