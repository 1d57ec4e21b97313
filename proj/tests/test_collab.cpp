#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "colabmem/collab.hpp"
#include "colabmem/common.hpp"
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
  return a;
}

ModelParams model_with(const ArchConfig& arch, float fill) {
  ModelParams p;
  p.arch = arch;
  p.weights.assign(param_count_for(arch), fill);
  return p;
}

OrgCorpus corpus_of(const std::string& org, const std::string& text) {
  return make_corpus(org, {make_source_file("a.py", text)});
}

}  // namespace

TEST_CASE("strategy names round trip and reject unknowns") {
  CHECK(strategy_name(Strategy::kCentralized) == "centralized");
  CHECK(parse_strategy("fedavg") == Strategy::kFedAvg);
  CHECK(parse_strategy("fedyogi") == Strategy::kFedYogi);
  CHECK(parse_strategy("incremental") == Strategy::kIncremental);
  CHECK_THROWS_AS(parse_strategy("fedprox"), Error);
}

TEST_CASE("model names join org ids in the documented shapes") {
  auto arch = tiny_arch();
  std::vector<std::string> orgs = {"A", "B", "C"};

  CHECK(model_name(default_plan(Strategy::kCentralized, arch), orgs) ==
        "Centralized_ABC");
  CHECK(model_name(default_plan(Strategy::kFedAvg, arch), orgs) ==
        "Federated_Avg_ABC");
  CHECK(model_name(default_plan(Strategy::kFedYogi, arch), orgs) ==
        "Federated_Yogi_ABC");

  auto plan = default_plan(Strategy::kIncremental, arch);
  plan.order = {"G", "M", "F"};
  CHECK(model_name(plan, orgs) == "Incremental_G2M2F");
  plan.order = {"A", "B", "C"};
  CHECK(model_name(plan, orgs) == "Incremental_A2B2C");

  CHECK(only_model_name("A") == "A_Only");
}

TEST_CASE("federated defaults differ from the sequential ones") {
  auto arch = tiny_arch();
  auto fed = default_plan(Strategy::kFedAvg, arch);
  CHECK(fed.rounds == 10);
  CHECK(fed.local_epochs == 1);
  auto cent = default_plan(Strategy::kCentralized, arch);
  CHECK(cent.local_epochs == 10);
  auto inc = default_plan(Strategy::kIncremental, arch);
  CHECK(inc.local_epochs == 10);
}

TEST_CASE("averaging identical clients returns the same weights") {
  auto arch = tiny_arch();
  auto m = init_model(arch, 4);
  auto avg = aggregate_fedavg({{m, 3.0}, {m, 1.0}, {m, 2.5}});
  REQUIRE(avg.weights.size() == m.weights.size());
  for (std::size_t i = 0; i < m.weights.size(); ++i) {
    CHECK(avg.weights[i] == m.weights[i]);
  }
}

TEST_CASE("averaging is client order invariant") {
  auto arch = tiny_arch();
  auto a = init_model(arch, 1);
  auto b = init_model(arch, 2);
  auto c = init_model(arch, 3);
  auto x = aggregate_fedavg({{a, 5.0}, {b, 2.0}, {c, 3.0}});
  auto y = aggregate_fedavg({{c, 3.0}, {a, 5.0}, {b, 2.0}});
  CHECK(x.weights == y.weights);
}

TEST_CASE("weighted averaging matches the hand computed combination") {
  auto arch = tiny_arch();
  auto a = model_with(arch, 1.0f);
  auto b = model_with(arch, 4.0f);
  auto avg = aggregate_fedavg({{a, 1.0}, {b, 3.0}});
  // (1*1 + 3*4) / 4 = 3.25 exactly representable.
  for (float w : avg.weights) REQUIRE(w == 3.25f);

  auto scaled = aggregate_fedavg({{a, 2.0}, {b, 6.0}});
  CHECK(scaled.weights == avg.weights);  // weight scaling cancels

  CHECK_THROWS_AS(aggregate_fedavg({}), Error);
  CHECK_THROWS_AS(aggregate_fedavg({{a, 0.0}, {b, 0.0}}), Error);
}

TEST_CASE("a zero delta leaves the yogi server parameters fixed") {
  auto arch = tiny_arch();
  auto current = init_model(arch, 8);
  auto state = make_yogi_state(current.param_count());
  std::vector<double> zero(current.param_count(), 0.0);

  auto [next, next_state] = yogi_server_update(state, current, zero);
  CHECK(next.weights == current.weights);
  for (double m : next_state.m) CHECK(m == 0.0);
  for (double v : next_state.v) CHECK(v == state.tau * state.tau);
}

TEST_CASE("one yogi step matches the scalar recurrence") {
  ArchConfig arch = tiny_arch();
  auto current = model_with(arch, 0.0f);
  auto state = make_yogi_state(current.param_count());
  const double d = 0.1;
  std::vector<double> delta(current.param_count(), d);

  auto [next, next_state] = yogi_server_update(state, current, delta);

  const double m1 = (1.0 - state.beta1) * d;                    // 0.01
  const double v0 = state.tau * state.tau;                      // 1e-6
  const double v1 = v0 - (1.0 - state.beta2) * d * d *
                             ((v0 - d * d) > 0 ? 1.0 : -1.0);   // 1.01e-4
  const double theta1 = state.eta * m1 / (std::sqrt(v1) + state.tau);

  CHECK(m1 == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(v1 == doctest::Approx(1.01e-4).epsilon(1e-12));
  for (double m : next_state.m) CHECK(std::abs(m - m1) < 1e-9);
  for (double v : next_state.v) CHECK(std::abs(v - v1) < 1e-9);
  for (float w : next.weights) {
    REQUIRE(std::abs(static_cast<double>(w) - theta1) < 1e-9);
  }

  std::vector<double> wrong_len(3, 0.0);
  CHECK_THROWS_AS(yogi_server_update(state, current, wrong_len), Error);
}

TEST_CASE("centralized training pools the corpora into one run") {
  auto arch = tiny_arch();
  auto plan = default_plan(Strategy::kCentralized, arch);
  plan.local_epochs = 2;
  std::vector<OrgCorpus> corpora = {corpus_of("A", "aaaa bbbb"),
                                    corpus_of("B", "cccc dddd")};
  auto m1 = train_centralized(corpora, plan, 42);
  auto m2 = train_centralized(corpora, plan, 42);
  CHECK(m1.weights == m2.weights);
  auto m3 = train_centralized(corpora, plan, 43);
  CHECK(m1.weights != m3.weights);
  CHECK_THROWS_AS(train_centralized({}, plan, 42), Error);
}

TEST_CASE("federated rounds visit every client with its own corpus") {
  auto arch = tiny_arch();
  auto plan = default_plan(Strategy::kFedAvg, arch);
  plan.rounds = 2;
  std::vector<OrgCorpus> corpora = {corpus_of("A", "aaaa bbbb"),
                                    corpus_of("B", "cccc dddd"),
                                    corpus_of("C", "eeee ffff")};

  std::vector<std::pair<int, std::string>> visits;
  TrainObserver obs;
  obs.on_client_round = [&](int round, const std::string& org,
                            const OrgCorpus& corpus) {
    visits.push_back({round, org});
    CHECK(corpus.org_id == org);
  };
  auto m = train_federated(corpora, Strategy::kFedAvg, plan, 42, &obs);
  REQUIRE(visits.size() == 6);
  CHECK(visits[0] == std::pair<int, std::string>{1, "A"});
  CHECK(visits[1] == std::pair<int, std::string>{1, "B"});
  CHECK(visits[2] == std::pair<int, std::string>{1, "C"});
  CHECK(visits[3].first == 2);

  auto again = train_federated(corpora, Strategy::kFedAvg, plan, 42);
  CHECK(m.weights == again.weights);

  auto yogi = train_federated(corpora, Strategy::kFedYogi, plan, 42);
  CHECK(yogi.weights != m.weights);

  CHECK_THROWS_AS(
      train_federated(corpora, Strategy::kCentralized, plan, 42), Error);
}

TEST_CASE("incremental training walks the stages in the given order") {
  auto arch = tiny_arch();
  auto plan = default_plan(Strategy::kIncremental, arch);
  plan.local_epochs = 1;
  std::vector<OrgCorpus> corpora = {corpus_of("A", "aaaa bbbb"),
                                    corpus_of("B", "cccc dddd"),
                                    corpus_of("C", "eeee ffff")};

  std::vector<std::string> stages;
  std::vector<ModelParams> snaps;
  TrainObserver obs;
  obs.on_stage_done = [&](int stage, const std::string& org,
                          const ModelParams& params) {
    CHECK(stage == static_cast<int>(stages.size()) + 1);
    stages.push_back(org);
    snaps.push_back(params);
  };
  auto m = train_incremental(corpora, {"B", "C", "A"}, plan, 42, &obs);
  CHECK(stages == std::vector<std::string>{"B", "C", "A"});
  REQUIRE(snaps.size() == 3);
  CHECK(snaps[2].weights == m.weights);
  CHECK(snaps[0].weights != snaps[1].weights);

  CHECK_THROWS_AS(train_incremental(corpora, {"B", "C"}, plan, 42), Error);
  CHECK_THROWS_AS(train_incremental(corpora, {"A", "B", "X"}, plan, 42),
                  Error);
  CHECK_THROWS_AS(train_incremental(corpora, {"A", "A", "B"}, plan, 42),
                  Error);
}

TEST_CASE("the registry stores checkpoints with provenance sidecars") {
  testutil::TmpDir tmp("registry");
  ModelRegistry reg(tmp.path);
  CHECK(reg.list().empty());
  CHECK_FALSE(reg.has("Centralized_AB"));

  auto params = init_model(tiny_arch(), 11);
  reg.put("Centralized_AB", params, "{\"strategy\":\"centralized\"}");
  reg.put("A_Only", params, "{\"strategy\":\"only\"}");

  CHECK(reg.has("Centralized_AB"));
  CHECK(reg.list() == std::vector<std::string>{"A_Only", "Centralized_AB"});
  CHECK(reg.get("Centralized_AB").weights == params.weights);
  CHECK(reg.provenance("A_Only") == "{\"strategy\":\"only\"}");

  CHECK_THROWS_AS(reg.get("missing"), Error);
  CHECK_THROWS_AS(reg.provenance("missing"), Error);
  CHECK_THROWS_AS(reg.put("bad/name", params, "{}"), Error);
  CHECK_THROWS_AS(reg.put("", params, "{}"), Error);
}
