#include <string>
#include <vector>

#include "colabmem/audit.hpp"
#include "colabmem/common.hpp"
#include "doctest.h"

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

ModelParams uniform_model() {
  ModelParams p;
  p.arch = tiny_arch();
  p.weights.assign(param_count_for(p.arch), 0.0f);
  return p;
}

GenerationRecord record_with(std::string prompt_id,
                             std::vector<std::string> samples) {
  GenerationRecord rec;
  rec.prompt_id = std::move(prompt_id);
  rec.model_name = "m";
  for (auto& s : samples) {
    rec.generated_line_counts.push_back(
        static_cast<int>(normalize_lines(s).lines.size()));
    rec.samples.push_back(std::move(s));
  }
  return rec;
}

CloneOccurrence gen_occ(const std::string& pseudo_path, int norm_start) {
  return {"generated", pseudo_path, norm_start + 1, norm_start};
}

}  // namespace

TEST_CASE("ratios render with three decimals") {
  CHECK(format_ratio_percent(7372.0 / 2961075.0) == "0.249%");
  CHECK(format_ratio_percent(68512.0 / 955695.0) == "7.169%");
  CHECK(format_ratio_percent(0.0) == "0.000%");
  CHECK(format_ratio_percent(1.0) == "100.000%");
  CHECK(format_ratio_percent(0.000005) == "0.001%");
}

TEST_CASE("overlapping block hits on one sample are counted once") {
  std::vector<GenerationRecord> records;
  records.push_back(record_with("p1", {"a\nb\nc\nd\ne\nf\ng\nh\ni\nj\n",
                                       "k\nl\nm\nn\no\n"}));
  records.push_back(record_with("p2", {"q\nr\ns\nt\nu\nv\nw\n"}));
  // 10 + 5 + 7 generated lines.

  std::vector<CloneBlock> blocks(3);
  blocks[0].line_count = 4;
  blocks[0].occurrences = {gen_occ("p1#0", 0), {"corp", "f.py", 3, 2}};
  blocks[1].line_count = 3;  // overlaps [2,5) with the first block's [0,4)
  blocks[1].occurrences = {gen_occ("p1#0", 2), {"corp", "f.py", 9, 8}};
  blocks[2].line_count = 3;
  blocks[2].occurrences = {gen_occ("p2#0", 1), {"corp", "g.py", 1, 0}};

  auto r = memorization_ratio(blocks, records);
  CHECK(r.lines_of_gen == 22);
  CHECK(r.mem_blocks == 3);
  CHECK(r.mem_lines == 5 + 3);  // [0,5) on p1#0 plus [1,4) on p2#0
  CHECK(r.ratio == doctest::Approx(8.0 / 22.0));

  // A block with corpus occurrences only contributes nothing.
  CloneBlock corpus_only;
  corpus_only.line_count = 6;
  corpus_only.occurrences = {{"corp", "f.py", 1, 0}, {"corp", "g.py", 1, 0}};
  blocks.push_back(corpus_only);
  auto r2 = memorization_ratio(blocks, records);
  CHECK(r2.mem_blocks == 3);
  CHECK(r2.mem_lines == r.mem_lines);

  std::vector<GenerationRecord> empty_records;
  empty_records.push_back(record_with("p", {"", "   \n"}));
  CHECK_THROWS_AS(memorization_ratio({}, empty_records), Error);
}

TEST_CASE("identical hits in two samples are counted in both") {
  std::vector<GenerationRecord> records;
  records.push_back(record_with("p", {"a\nb\nc\nd\n", "a\nb\nc\ne\n"}));
  std::vector<CloneBlock> blocks(1);
  blocks[0].line_count = 3;
  blocks[0].occurrences = {gen_occ("p#0", 0), gen_occ("p#1", 0),
                           {"corp", "f.py", 1, 0}};
  auto r = memorization_ratio(blocks, records);
  CHECK(r.mem_blocks == 1);
  CHECK(r.mem_lines == 6);
  CHECK(r.lines_of_gen == 8);
}

TEST_CASE("memorization keeps only blocks seen on both sides") {
  OrgCorpus corpus = make_corpus(
      "corp",
      {make_source_file("f1.py", "y1\ny2\ny3\nu1\nx1\nx2\nx3\nx4\n"),
       make_source_file("f2.py", "y1\ny2\ny3\nu2\n")});

  std::vector<GenerationRecord> records;
  records.push_back(record_with(
      "p", {"x1\nx2\nx3\nx4\ng1\nz1\nz2\nz3\n", "z1\nz2\nz3\ng2\n"}));

  auto blocks = detect_memorization(records, corpus, {3});
  REQUIRE(blocks.size() == 1);
  CHECK(blocks[0].normalized_lines ==
        std::vector<std::string>{"x1", "x2", "x3", "x4"});
  bool has_gen = false, has_corp = false;
  for (const auto& occ : blocks[0].occurrences) {
    if (occ.source_id == "generated") {
      has_gen = true;
      CHECK(occ.path == "p#0");
    }
    if (occ.source_id == "corp") has_corp = true;
  }
  CHECK(has_gen);
  CHECK(has_corp);
}

TEST_CASE("per corpus audit rows share the generation denominator") {
  OrgCorpus a = make_corpus(
      "A", {make_source_file("a.py", "x1\nx2\nx3\nx4\nua\n")});
  OrgCorpus b = make_corpus(
      "B", {make_source_file("b.py", "n1\nn2\nn3\nub\n")});
  std::vector<GenerationRecord> records;
  records.push_back(record_with("p", {"x1\nx2\nx3\nx4\ngg\n"}));

  auto report = audit_model(records, "m", {a, b}, {3});
  CHECK(report.model_name == "m");
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].org_id == "A");
  CHECK(report.rows[0].lines_of_gen == 5);
  CHECK(report.rows[0].mem_lines == 4);
  CHECK(report.rows[0].mem_blocks == 1);
  CHECK(report.rows[1].org_id == "B");
  CHECK(report.rows[1].lines_of_gen == 5);
  CHECK(report.rows[1].mem_lines == 0);
  CHECK(report.rows[1].mem_ratio == 0.0);
}

TEST_CASE("extraction runs every prompt and isolates failures") {
  auto model = uniform_model();
  Prompt good;
  good.id = "fn:o:a.py:1";
  good.text = "def f():";
  Prompt too_long;
  too_long.id = "fn:o:a.py:9";
  too_long.text = std::string(40, 'x');  // over the cap of 8

  SamplingConfig cfg;
  cfg.n_generations = 3;
  cfg.max_new_tokens = 6;
  cfg.seed = 5;

  auto records = run_extraction(model, "m", {good, too_long}, cfg);
  REQUIRE(records.size() == 2);
  CHECK(records[0].error.empty());
  CHECK(records[0].samples.size() == 3);
  CHECK(records[0].generated_line_counts.size() == 3);
  CHECK(records[0].model_name == "m");
  CHECK(records[0].sampling.seed == derive_seed(5, {"extract", good.id}));

  CHECK_FALSE(records[1].error.empty());
  CHECK(records[1].samples.empty());

  auto again = run_extraction(model, "m", {good, too_long}, cfg);
  CHECK(again[0].samples == records[0].samples);
}

TEST_CASE("clone prefix evaluation insists on clone prompts") {
  auto model = uniform_model();
  SamplingConfig cfg;
  cfg.n_generations = 2;
  cfg.max_new_tokens = 4;

  CHECK_THROWS_AS(clone_mem_eval(model, "m", {}, cfg, {3}), Error);

  Prompt fn;
  fn.id = "fn:o:a.py:1";
  fn.kind = PromptKind::kFunction;
  fn.text = "def f():";
  CHECK_THROWS_AS(clone_mem_eval(model, "m", {fn}, cfg, {3}), Error);

  Prompt clone;
  clone.id = "clone:0:0";
  clone.kind = PromptKind::kClonePrefix;
  clone.text = "l1\nl2\n";
  clone.expected_suffix = "l3\nl4\n";
  clone.origin_org = "A+B";
  cfg.seed = 11;
  std::vector<GenerationRecord> records;
  auto r = clone_mem_eval(model, "m", {clone}, cfg, {3}, &records);
  REQUIRE(records.size() == 1);
  CHECK(records[0].prompt_id == "clone:0:0");
  CHECK(records[0].samples.size() == 2);
  CHECK(r.lines_of_gen >= 1);
  CHECK(r.mem_lines <= r.lines_of_gen);
}
