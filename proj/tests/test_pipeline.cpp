#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include "colabmem/common.hpp"
#include "colabmem/config.hpp"
#include "colabmem/pipeline.hpp"
#include "doctest.h"
#include "tmpdir.hpp"

using namespace colabmem;

namespace {

std::string minimal_config(const std::string& dir_a,
                           const std::string& dir_b) {
  return std::string("{\"orgs\": [{\"id\": \"A\", \"dir\": \"") + dir_a +
         "\"}, {\"id\": \"B\", \"dir\": \"" + dir_b + "\"}]}";
}

void write_org(const std::filesystem::path& dir, const std::string& tag,
               int n_files) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < n_files; ++i) {
    std::ofstream out(dir / ("m" + std::to_string(i) + ".py"));
    out << "def " << tag << i << "():\n"
        << "    value_" << tag << " = " << i << "\n"
        << "    return value_" << tag << " + " << i << "\n";
  }
}

}  // namespace

TEST_CASE("a minimal config fills the documented defaults") {
  auto cfg = parse_config(minimal_config("da", "db"));
  CHECK(cfg.seed == 42);
  CHECK(cfg.out_dir == "out");
  CHECK(cfg.source_suffix == ".py");
  CHECK(cfg.train_fraction == 0.9);
  CHECK(cfg.clones.min_lines == 6);
  CHECK(cfg.crossorg_eval.min_lines == 3);
  CHECK(cfg.dedup.threshold == 0.85);
  CHECK(cfg.dedup.num_perm == 128);
  CHECK(cfg.dedup.shingle_k == 5);
  CHECK(cfg.dedup.seed == cfg.seed);
  CHECK(cfg.sampling.seed == cfg.seed);
  CHECK(cfg.arch.context_len == 512);
  CHECK(cfg.arch.d_model == 128);
  CHECK(cfg.centralized_epochs == 10);
  CHECK(cfg.federated_rounds == 10);
  CHECK(cfg.federated_local_epochs == 1);
  CHECK(cfg.prompt_fraction == 0.1);
  CHECK(cfg.passk.n == 200);
  CHECK(cfg.passk.k == std::vector<int>{1, 10, 100});

  std::vector<std::string> raws;
  for (const auto& m : cfg.models) raws.push_back(m.raw);
  CHECK(raws == std::vector<std::string>{"centralized", "fedavg", "fedyogi",
                                         "incremental:A2B", "only:A",
                                         "only:B"});
}

TEST_CASE("unknown keys are rejected at every level") {
  CHECK_THROWS_AS(parse_config("{\"orgz\": []}"), Error);
  CHECK_THROWS_AS(
      parse_config("{\"orgs\": [{\"id\": \"A\", \"dir\": \"d\"}], "
                   "\"filter\": {\"min_alnum\": 0.2}}"),
      Error);
  CHECK_THROWS_AS(
      parse_config("{\"orgs\": [{\"id\": \"A\", \"dir\": \"d\"}], "
                   "\"arch\": {\"dmodel\": 64}}"),
      Error);
  CHECK_THROWS_AS(
      parse_config("{\"orgs\": [{\"id\": \"A\", \"dir\": \"d\"}], "
                   "\"train\": {\"epochs\": 3}}"),
      Error);
  CHECK_THROWS_AS(
      parse_config("{\"orgs\": [{\"id\": \"A\", \"dir\": \"d\", "
                   "\"nickname\": \"a\"}]}"),
      Error);
  CHECK_THROWS_AS(
      parse_config("{\"orgs\": [{\"id\": \"A\", \"dir\": \"d\"}], "
                   "\"sampling\": {\"topp\": 0.6}}"),
      Error);
  CHECK_THROWS_AS(parse_config("not json at all"), Error);
  CHECK_THROWS_AS(parse_config("{\"orgs\": []}"), Error);
  CHECK_THROWS_AS(
      parse_config("{\"orgs\": [{\"id\": \"A\", \"dir\": \"d\"}, "
                   "{\"id\": \"A\", \"dir\": \"e\"}]}"),
      Error);
}

TEST_CASE("model specs parse strategies and stage orders") {
  auto cfg = parse_config(
      "{\"orgs\": [{\"id\": \"A\", \"dir\": \"a\"}, {\"id\": \"B\", \"dir\": "
      "\"b\"}, {\"id\": \"C\", \"dir\": \"c\"}], \"train\": {\"models\": "
      "[\"incremental:C2A2B\", \"only:B\", \"centralized\"]}}");
  REQUIRE(cfg.models.size() == 3);
  CHECK(cfg.models[0].strategy == "incremental");
  CHECK(cfg.models[0].order == std::vector<std::string>{"C", "A", "B"});
  CHECK(cfg.models[1].strategy == "only");
  CHECK(cfg.models[1].order == std::vector<std::string>{"B"});
  CHECK(cfg.models[2].strategy == "centralized");
  CHECK(cfg.models[2].order.empty());

  auto bad = [](const std::string& model) {
    return std::string("{\"orgs\": [{\"id\": \"A\", \"dir\": \"a\"}, "
                       "{\"id\": \"B\", \"dir\": \"b\"}], "
                       "\"train\": {\"models\": [\"") +
           model + "\"]}";
  };
  CHECK_THROWS_AS(parse_config(bad("centralized:A")), Error);
  CHECK_THROWS_AS(parse_config(bad("incremental")), Error);
  CHECK_THROWS_AS(parse_config(bad("incremental:A")), Error);
  CHECK_THROWS_AS(parse_config(bad("incremental:A2X")), Error);
  CHECK_THROWS_AS(parse_config(bad("only:")), Error);
  CHECK_THROWS_AS(parse_config(bad("only:X")), Error);
  CHECK_THROWS_AS(parse_config(bad("fedprox")), Error);
}

TEST_CASE("the config hash ignores key order and the output directory") {
  std::string base =
      "{\"seed\": 7, \"orgs\": [{\"id\": \"A\", \"dir\": \"a\"}], "
      "\"arch\": {\"d_model\": 32, \"n_heads\": 2}}";
  std::string reordered =
      "{\"arch\": {\"n_heads\": 2, \"d_model\": 32}, "
      "\"orgs\": [{\"dir\": \"a\", \"id\": \"A\"}], \"seed\": 7}";
  std::string other_out =
      "{\"seed\": 7, \"out_dir\": \"elsewhere\", "
      "\"orgs\": [{\"id\": \"A\", \"dir\": \"a\"}], "
      "\"arch\": {\"d_model\": 32, \"n_heads\": 2}}";
  std::string other_seed =
      "{\"seed\": 8, \"orgs\": [{\"id\": \"A\", \"dir\": \"a\"}], "
      "\"arch\": {\"d_model\": 32, \"n_heads\": 2}}";

  auto h = [](const std::string& text) {
    return parse_config(text).config_hash;
  };
  CHECK(h(base) == h(reordered));
  CHECK(h(base) == h(other_out));
  CHECK(h(base) != h(other_seed));

  auto cfg = parse_config(base);
  auto hex = config_hash_hex(cfg);
  CHECK(hex.size() == 16);
  CHECK(hex.find_first_not_of("0123456789abcdef") == std::string::npos);
}

TEST_CASE("file loading resolves org dirs against the config directory") {
  testutil::TmpDir tmp("cfgload");
  std::filesystem::create_directories(tmp.path / "nested");
  tmp.write("nested/run.json",
            "{\"orgs\": [{\"id\": \"A\", \"dir\": \"corpora/a\"}], "
            "\"out_dir\": \"outputs\"}");

  auto cfg = load_config(tmp.path / "nested" / "run.json");
  CHECK(cfg.orgs[0].dir ==
        (tmp.path / "nested" / "corpora/a").string());
  CHECK(cfg.out_dir == "outputs");  // stays relative to the working dir
}

TEST_CASE("dotted overrides rewrite values before parsing") {
  testutil::TmpDir tmp("cfgover");
  tmp.write("run.json",
            "{\"orgs\": [{\"id\": \"A\", \"dir\": \"a\"}], "
            "\"arch\": {\"d_model\": 64}}");
  std::string seed = "99";
  std::string out = "custom_out";
  auto cfg = load_config_with_overrides(
      tmp.path / "run.json",
      {"arch.d_model=16", "train.centralized_epochs=3",
       "filter.generated_marker=machine-made"},
      &seed, &out);
  CHECK(cfg.arch.d_model == 16);
  CHECK(cfg.centralized_epochs == 3);
  CHECK(cfg.filter.generated_marker == "machine-made");
  CHECK(cfg.seed == 99);
  CHECK(cfg.out_dir == "custom_out");
  CHECK(cfg.sampling.seed == 99);

  CHECK_THROWS_AS(load_config_with_overrides(tmp.path / "run.json",
                                             {"no equals sign"}, nullptr,
                                             nullptr),
                  Error);
  CHECK_THROWS_AS(load_config_with_overrides(tmp.path / "run.json",
                                             {"arch.dmodel=16"}, nullptr,
                                             nullptr),
                  Error);
}

TEST_CASE("stages know their order and reject unknown names") {
  const auto& names = stage_names();
  REQUIRE(names.size() == 11);
  CHECK(names.front() == "ingest");
  CHECK(names[1] == "dedup");
  CHECK(names.back() == "report");

  auto cfg = parse_config(minimal_config("a", "b"));
  CHECK_THROWS_AS(run_stage("compile", cfg), Error);
}

TEST_CASE("a stage refuses to start without its upstream artifact") {
  testutil::TmpDir tmp("stagedeps");
  write_org(tmp.path / "a", "alpha", 3);
  write_org(tmp.path / "b", "beta", 3);
  auto cfg = parse_config(minimal_config((tmp.path / "a").string(),
                                         (tmp.path / "b").string()));
  cfg.out_dir = (tmp.path / "out").string();

  try {
    run_dedup(cfg);
    FAIL("dedup must not run before ingest");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("ingest") != std::string::npos);
  }

  run_ingest(cfg);
  run_dedup(cfg);
  CHECK(std::filesystem::exists(tmp.path / "out" / "corpus" /
                                "A.train.jsonl"));
}

TEST_CASE("artifacts from a different configuration are rejected") {
  testutil::TmpDir tmp("stagehash");
  write_org(tmp.path / "a", "alpha", 3);
  write_org(tmp.path / "b", "beta", 3);
  std::string orgs_part =
      "\"orgs\": [{\"id\": \"A\", \"dir\": \"" + (tmp.path / "a").string() +
      "\"}, {\"id\": \"B\", \"dir\": \"" + (tmp.path / "b").string() +
      "\"}]";
  auto cfg = parse_config("{" + orgs_part + "}");
  cfg.out_dir = (tmp.path / "out").string();
  run_ingest(cfg);

  auto changed = parse_config("{\"seed\": 43, " + orgs_part + "}");
  REQUIRE(changed.config_hash != cfg.config_hash);
  changed.out_dir = cfg.out_dir;
  try {
    run_dedup(changed);
    FAIL("dedup must reject artifacts from another config");
  } catch (const Error& e) {
    std::string msg = e.what();
    CHECK(msg.find("hash") != std::string::npos);
  }
}

TEST_CASE("canonical output must appear as one consecutive line run") {
  std::string canonical = "a = 1\nb = 2\n";
  CHECK(exact_match_pass("a = 1\nb = 2\n", canonical));
  CHECK(exact_match_pass("noise\n  a = 1\n\tb = 2\nmore\n", canonical));
  CHECK(exact_match_pass("a = 1\n\n\nb = 2\n", canonical));
  CHECK_FALSE(exact_match_pass("a = 1\ngap\nb = 2\n", canonical));
  CHECK_FALSE(exact_match_pass("a = 1\n", canonical));
  CHECK_FALSE(exact_match_pass("", canonical));
  CHECK_FALSE(exact_match_pass("b = 2\na = 1\n", canonical));
}
