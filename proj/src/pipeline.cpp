#include "colabmem/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "colabmem/audit.hpp"
#include "colabmem/collab.hpp"
#include "colabmem/common.hpp"
#include "colabmem/dedup.hpp"
#include "colabmem/metrics.hpp"
#include "colabmem/pysurface.hpp"
#include "colabmem/report.hpp"
#include "colabmem/stats.hpp"
#include "json.hpp"

namespace colabmem {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path out_path(const RunConfig& cfg, const std::string& rel) {
  return fs::path(cfg.out_dir) / rel;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("io", "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_artifact(const RunConfig& cfg, const std::string& rel,
                    const std::string& stage, const std::vector<json>& records) {
  json meta{{"artifact", rel},
            {"stage", stage},
            {"config_hash", config_hash_hex(cfg)},
            {"seed", cfg.seed}};
  std::ostringstream out;
  out << meta.dump() << '\n';
  for (const auto& rec : records) out << rec.dump() << '\n';
  write_text_atomic(out_path(cfg, rel), out.str());
}

std::vector<json> read_artifact(const RunConfig& cfg, const std::string& rel,
                                const std::string& producer) {
  fs::path path = out_path(cfg, rel);
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("pipeline", "missing artifact '" + rel + "'; run '" +
                                producer + "' first");
  }
  std::string line;
  if (!std::getline(in, line))
    throw Error("pipeline", "artifact '" + rel + "' is empty");
  json meta = json::parse(line, nullptr, false);
  if (meta.is_discarded() || !meta.contains("config_hash"))
    throw Error("pipeline", "artifact '" + rel + "' has no metadata line");
  if (meta["config_hash"].get<std::string>() != config_hash_hex(cfg)) {
    throw Error("pipeline", "artifact '" + rel +
                                "' was produced under a different config "
                                "(hash " +
                                meta["config_hash"].get<std::string>() +
                                ", current " + config_hash_hex(cfg) + ")");
  }
  std::vector<json> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded())
      throw Error("pipeline", "corrupt record in artifact '" + rel + "'");
    records.push_back(std::move(rec));
  }
  return records;
}

std::string corpus_rel(const std::string& org, const std::string& kind) {
  return "corpus/" + org + "." + kind + ".jsonl";
}

OrgCorpus read_corpus_artifact(const RunConfig& cfg, const std::string& org,
                               const std::string& kind,
                               const std::string& producer, Split split) {
  std::vector<SourceFile> files;
  for (const auto& rec : read_artifact(cfg, corpus_rel(org, kind), producer)) {
    files.push_back(make_source_file(rec.at("path").get<std::string>(),
                                     rec.at("text").get<std::string>()));
  }
  return make_corpus(org, std::move(files), split);
}

std::vector<OrgCorpus> read_train_corpora(const RunConfig& cfg) {
  std::vector<OrgCorpus> corpora;
  for (const auto& org : cfg.orgs)
    corpora.push_back(
        read_corpus_artifact(cfg, org.id, "train", "dedup", Split::kTrain));
  return corpora;
}

json block_to_json(const CloneBlock& block) {
  json occs = json::array();
  for (const auto& occ : block.occurrences) {
    occs.push_back({{"source_id", occ.source_id},
                    {"path", occ.path},
                    {"start_line", occ.start_line},
                    {"norm_start", occ.norm_start}});
  }
  return {{"line_count", block.line_count},
          {"lines", block.normalized_lines},
          {"occurrences", occs}};
}

CloneBlock block_from_json(const json& rec) {
  CloneBlock block;
  block.line_count = rec.at("line_count").get<int>();
  block.normalized_lines = rec.at("lines").get<std::vector<std::string>>();
  for (const auto& o : rec.at("occurrences")) {
    block.occurrences.push_back({o.at("source_id").get<std::string>(),
                                 o.at("path").get<std::string>(),
                                 o.at("start_line").get<int>(),
                                 o.at("norm_start").get<int>()});
  }
  return block;
}

json prompt_to_json(const Prompt& p) {
  json rec{{"id", p.id},
           {"kind", p.kind == PromptKind::kFunction ? "function" : "clone_prefix"},
           {"text", p.text},
           {"token_len", p.token_len},
           {"origin_org", p.origin_org}};
  if (p.expected_suffix) rec["expected_suffix"] = *p.expected_suffix;
  return rec;
}

Prompt prompt_from_json(const json& rec) {
  Prompt p;
  p.id = rec.at("id").get<std::string>();
  p.kind = rec.at("kind").get<std::string>() == "function"
               ? PromptKind::kFunction
               : PromptKind::kClonePrefix;
  p.text = rec.at("text").get<std::string>();
  p.token_len = rec.at("token_len").get<int>();
  p.origin_org = rec.at("origin_org").get<std::string>();
  if (rec.contains("expected_suffix"))
    p.expected_suffix = rec["expected_suffix"].get<std::string>();
  return p;
}

json generation_to_json(const GenerationRecord& rec) {
  // Model output is raw bytes and need not be valid UTF-8.
  json samples = json::array();
  for (const auto& s : rec.samples) samples.push_back(base64_encode(s));
  return {{"prompt_id", rec.prompt_id},
          {"model", rec.model_name},
          {"samples_b64", samples},
          {"line_counts", rec.generated_line_counts},
          {"seed", rec.sampling.seed},
          {"error", rec.error}};
}

GenerationRecord generation_from_json(const json& j, const RunConfig& cfg) {
  GenerationRecord rec;
  rec.prompt_id = j.at("prompt_id").get<std::string>();
  rec.model_name = j.at("model").get<std::string>();
  for (const auto& s : j.at("samples_b64"))
    rec.samples.push_back(base64_decode(s.get<std::string>()));
  rec.generated_line_counts = j.at("line_counts").get<std::vector<int>>();
  rec.sampling = cfg.sampling;
  rec.sampling.seed = j.at("seed").get<std::uint64_t>();
  rec.error = j.at("error").get<std::string>();
  return rec;
}

ClientWeighting parse_weighting(const std::string& name) {
  if (name == "uniform") return ClientWeighting::kUniform;
  if (name == "by_size") return ClientWeighting::kBySize;
  throw Error("config", "unknown client_weights '" + name + "'");
}

std::vector<std::string> org_ids(const RunConfig& cfg) {
  std::vector<std::string> ids;
  for (const auto& org : cfg.orgs) ids.push_back(org.id);
  return ids;
}

TrainPlan plan_for(const RunConfig& cfg, const ModelSpec& spec) {
  TrainPlan plan;
  plan.arch = cfg.arch;
  plan.hyper = cfg.hyper;
  plan.client_weights = parse_weighting(cfg.client_weights);
  if (spec.strategy == "centralized" || spec.strategy == "only") {
    plan.strategy = Strategy::kCentralized;
    plan.local_epochs = cfg.centralized_epochs;
  } else if (spec.strategy == "fedavg" || spec.strategy == "fedyogi") {
    plan.strategy = spec.strategy == "fedavg" ? Strategy::kFedAvg
                                              : Strategy::kFedYogi;
    plan.rounds = cfg.federated_rounds;
    plan.local_epochs = cfg.federated_local_epochs;
  } else {
    plan.strategy = Strategy::kIncremental;
    plan.order = spec.order;
    plan.local_epochs = cfg.incremental_epochs;
  }
  plan.hyper.epochs = plan.local_epochs;
  return plan;
}

std::string sanitize_task_id(const std::string& id) {
  std::string out;
  for (char c : id)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')
               ? c
               : '_';
  return out;
}

}  // namespace

std::string model_name_for(const RunConfig& cfg, const ModelSpec& spec) {
  if (spec.strategy == "only") return only_model_name(spec.order.front());
  return model_name(plan_for(cfg, spec), org_ids(cfg));
}

bool exact_match_pass(const std::string& sample, const std::string& canonical) {
  auto want = normalize_lines(canonical).lines;
  auto have = normalize_lines(sample).lines;
  if (want.empty()) throw Error("passk", "canonical output has no code lines");
  return std::search(have.begin(), have.end(), want.begin(), want.end()) !=
         have.end();
}

void run_ingest(const RunConfig& cfg) {
  for (const auto& org : cfg.orgs) {
    auto [raw, skipped] =
        ingest(org.dir, org.id, IngestOptions{cfg.source_suffix});
    auto [kept, dropped] = filter_files(raw, cfg.filter);

    std::vector<json> file_records;
    for (const auto& file : kept.files)
      file_records.push_back({{"path", file.path}, {"text", file.text}});
    write_artifact(cfg, corpus_rel(org.id, "files"), "ingest", file_records);

    std::vector<json> skip_records;
    for (const auto& s : skipped)
      skip_records.push_back({{"path", s.path}, {"reason", s.reason}});
    for (const auto& s : dropped)
      skip_records.push_back({{"path", s.path}, {"reason", s.reason}});
    write_artifact(cfg, corpus_rel(org.id, "skipped"), "ingest", skip_records);
  }
}

void run_dedup(const RunConfig& cfg) {
  DedupOptions opts = cfg.dedup;
  for (const auto& org : cfg.orgs) {
    OrgCorpus corpus =
        read_corpus_artifact(cfg, org.id, "files", "ingest", Split::kUnsplit);
    auto [unique, groups] = lsh_dedup(corpus, opts);

    std::vector<json> group_records;
    for (const auto& g : groups) {
      group_records.push_back(
          {{"kept", g.kept_path}, {"removed", g.dropped_paths}});
    }
    write_artifact(cfg, corpus_rel(org.id, "duplicates"), "dedup",
                   group_records);

    auto [train, val] = split_corpus(unique, cfg.train_fraction, cfg.seed);
    for (const auto* side : {&train, &val}) {
      std::vector<json> records;
      for (const auto& file : side->files)
        records.push_back({{"path", file.path}, {"text", file.text}});
      write_artifact(cfg,
                     corpus_rel(org.id, side == &train ? "train" : "val"),
                     "dedup", records);
    }
  }
}

void run_stats(const RunConfig& cfg) {
  std::vector<json> rows;
  for (const auto& org : cfg.orgs) {
    OrgCorpus train =
        read_corpus_artifact(cfg, org.id, "train", "dedup", Split::kTrain);
    auto blocks = detect_clones({to_clone_source(train)}, cfg.clones);
    SurfaceCounts surface = count_surface(train);
    StatsRecord per_mb = per_mb_stats(train, blocks);

    std::vector<json> block_records;
    for (const auto& b : blocks) block_records.push_back(block_to_json(b));
    write_artifact(cfg, "clones/" + org.id + ".intra.jsonl", "stats",
                   block_records);

    rows.push_back({{"org", org.id},
                    {"files", train.files.size()},
                    {"bytes", train.total_bytes()},
                    {"loc", train.total_lines()},
                    {"classes", surface.classes},
                    {"functions", surface.functions},
                    {"docstrings", surface.docstrings},
                    {"clone_blocks", blocks.size()},
                    {"clone_loc", total_clone_lines(blocks)},
                    {"per_mb",
                     {{"loc", per_mb.loc_per_mb},
                      {"classes", per_mb.classes_per_mb},
                      {"funcs", per_mb.funcs_per_mb},
                      {"docs", per_mb.docs_per_mb},
                      {"clone_blocks", per_mb.clone_blocks_per_mb},
                      {"clone_loc", per_mb.clone_loc_per_mb}}}});
  }
  write_artifact(cfg, "stats/stats.jsonl", "stats", rows);
}

void run_clones(const RunConfig& cfg) {
  auto corpora = read_train_corpora(cfg);
  auto blocks = cross_org_clones(corpora, cfg.clones);
  std::vector<json> records;
  for (const auto& b : blocks) records.push_back(block_to_json(b));
  write_artifact(cfg, "clones/crossorg.jsonl", "clones", records);
}

void run_prompts(const RunConfig& cfg) {
  int cap = cfg.arch.prompt_cap();

  std::vector<Prompt> all;
  for (const auto& org : cfg.orgs) {
    OrgCorpus train =
        read_corpus_artifact(cfg, org.id, "train", "dedup", Split::kTrain);
    auto prompts = build_function_prompts(train, cap);
    all.insert(all.end(), prompts.begin(), prompts.end());
  }
  std::vector<json> all_records;
  for (const auto& p : all) all_records.push_back(prompt_to_json(p));
  write_artifact(cfg, "prompts/functions.all.jsonl", "prompts", all_records);

  auto sampled = sample_prompts(all, cfg.prompt_fraction, cfg.seed);
  std::vector<json> sampled_records;
  for (const auto& p : sampled) sampled_records.push_back(prompt_to_json(p));
  write_artifact(cfg, "prompts/functions.jsonl", "prompts", sampled_records);

  std::vector<CloneBlock> blocks;
  for (const auto& rec : read_artifact(cfg, "clones/crossorg.jsonl", "clones"))
    blocks.push_back(block_from_json(rec));
  auto clone_prompts = build_clone_prefix_prompts(blocks, cap);
  std::vector<json> clone_records;
  for (const auto& p : clone_prompts)
    clone_records.push_back(prompt_to_json(p));
  write_artifact(cfg, "prompts/clones.jsonl", "prompts", clone_records);
}

void run_train(const RunConfig& cfg) {
  auto corpora = read_train_corpora(cfg);
  std::vector<OrgCorpus> val_corpora;
  for (const auto& org : cfg.orgs)
    val_corpora.push_back(
        read_corpus_artifact(cfg, org.id, "val", "dedup", Split::kValidation));

  ModelRegistry registry(out_path(cfg, "models"));
  std::vector<json> eff_rows;
  for (const auto& spec : cfg.models) {
    TrainPlan plan = plan_for(cfg, spec);
    std::string name = model_name_for(cfg, spec);

    ModelParams params;
    if (spec.strategy == "only") {
      const auto& org = spec.order.front();
      auto it = std::find_if(corpora.begin(), corpora.end(),
                             [&org](const OrgCorpus& c) {
                               return c.org_id == org;
                             });
      params = train_centralized({*it}, plan, cfg.seed);
    } else if (plan.strategy == Strategy::kCentralized) {
      params = train_centralized(corpora, plan, cfg.seed);
    } else if (plan.strategy == Strategy::kIncremental) {
      params = train_incremental(corpora, plan.order, plan, cfg.seed);
    } else {
      params = train_federated(corpora, plan.strategy, plan, cfg.seed);
    }

    json prov{{"name", name},
              {"strategy", spec.strategy},
              {"order", spec.order},
              {"rounds", plan.rounds},
              {"local_epochs", plan.local_epochs},
              {"client_weights", cfg.client_weights},
              {"seed", cfg.seed},
              {"config_hash", config_hash_hex(cfg)},
              {"arch",
               {{"vocab_size", cfg.arch.vocab_size},
                {"context_len", cfg.arch.context_len},
                {"d_model", cfg.arch.d_model},
                {"n_heads", cfg.arch.n_heads},
                {"n_layers", cfg.arch.n_layers},
                {"ffn_mult", cfg.arch.ffn_mult}}}};
    registry.put(name, params, prov.dump());

    json ppl = json::object();
    std::vector<SourceFile> pooled_files;
    for (std::size_t i = 0; i < val_corpora.size(); ++i) {
      ppl[cfg.orgs[i].id] = perplexity(params, val_corpora[i]);
      for (const auto& file : val_corpora[i].files) {
        pooled_files.push_back(
            make_source_file(cfg.orgs[i].id + "/" + file.path, file.text));
      }
    }
    OrgCorpus pooled =
        make_corpus("pooled", std::move(pooled_files), Split::kValidation);
    eff_rows.push_back({{"model", name},
                        {"ppl", ppl},
                        {"pooled", perplexity(params, pooled)}});
  }
  write_artifact(cfg, "models/effectiveness.jsonl", "train", eff_rows);
}

void run_generate(const RunConfig& cfg) {
  std::vector<Prompt> prompts;
  for (const auto& rec : read_artifact(cfg, "prompts/functions.jsonl", "prompts"))
    prompts.push_back(prompt_from_json(rec));

  ModelRegistry registry(out_path(cfg, "models"));
  for (const auto& spec : cfg.models) {
    std::string name = model_name_for(cfg, spec);
    if (!registry.has(name))
      throw Error("pipeline", "model '" + name + "' not found; run 'train' first");
    ModelParams params = registry.get(name);

    SamplingConfig sampling = cfg.sampling;
    sampling.seed = derive_seed(cfg.seed, {"generate", name});
    auto records = run_extraction(params, name, prompts, sampling);

    std::vector<json> out;
    for (const auto& rec : records) out.push_back(generation_to_json(rec));
    write_artifact(cfg, "generations/" + name + ".jsonl", "generate", out);
  }
}

void run_audit(const RunConfig& cfg) {
  auto corpora = read_train_corpora(cfg);
  std::vector<json> rows;
  for (const auto& spec : cfg.models) {
    std::string name = model_name_for(cfg, spec);
    std::vector<GenerationRecord> records;
    for (const auto& rec :
         read_artifact(cfg, "generations/" + name + ".jsonl", "generate"))
      records.push_back(generation_from_json(rec, cfg));

    MemorizationReport report = audit_model(records, name, corpora, cfg.clones);
    for (const auto& row : report.rows) {
      rows.push_back({{"model", name},
                      {"org", row.org_id},
                      {"lines_of_gen", row.lines_of_gen},
                      {"mem_blocks", row.mem_blocks},
                      {"mem_lines", row.mem_lines},
                      {"ratio", row.mem_ratio}});
    }
  }
  write_artifact(cfg, "audit/memorization.jsonl", "audit", rows);
}

void run_crossorg(const RunConfig& cfg) {
  std::vector<Prompt> prompts;
  for (const auto& rec : read_artifact(cfg, "prompts/clones.jsonl", "prompts"))
    prompts.push_back(prompt_from_json(rec));

  ModelRegistry registry(out_path(cfg, "models"));
  std::vector<json> rows;
  for (const auto& spec : cfg.models) {
    std::string name = model_name_for(cfg, spec);
    if (!registry.has(name))
      throw Error("pipeline", "model '" + name + "' not found; run 'train' first");
    ModelParams params = registry.get(name);

    SamplingConfig sampling = cfg.sampling;
    sampling.seed = derive_seed(cfg.seed, {"crossorg", name});

    if (prompts.empty()) {
      rows.push_back({{"model", name},
                      {"lines_of_gen", 0},
                      {"mem_blocks", 0},
                      {"mem_lines", 0},
                      {"ratio", 0.0}});
      write_artifact(cfg, "generations/crossorg_" + name + ".jsonl", "crossorg",
                     {});
      continue;
    }

    std::vector<GenerationRecord> records;
    RatioResult result = clone_mem_eval(params, name, prompts, sampling,
                                        cfg.crossorg_eval, &records);
    std::vector<json> recs;
    for (const auto& rec : records) recs.push_back(generation_to_json(rec));
    write_artifact(cfg, "generations/crossorg_" + name + ".jsonl", "crossorg",
                   recs);

    rows.push_back({{"model", name},
                    {"lines_of_gen", result.lines_of_gen},
                    {"mem_blocks", result.mem_blocks},
                    {"mem_lines", result.mem_lines},
                    {"ratio", result.ratio}});
  }
  write_artifact(cfg, "audit/crossorg.jsonl", "crossorg", rows);
}

void run_passk(const RunConfig& cfg) {
  std::vector<json> rows;

  for (std::size_t i = 0; i < cfg.passk.counts.size(); ++i) {
    auto [n, c] = cfg.passk.counts[i];
    rows.push_back({{"model", "external"},
                    {"task", "counts" + std::to_string(i)},
                    {"n", n},
                    {"c", c}});
  }

  if (!cfg.passk.tasks_file.empty()) {
    std::ifstream in(cfg.passk.tasks_file, std::ios::binary);
    if (!in)
      throw Error("io", "cannot open tasks file " + cfg.passk.tasks_file);
    struct Task {
      std::string id;
      std::string prompt;
      std::string canonical;
    };
    std::vector<Task> tasks;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json rec = json::parse(line, nullptr, false);
      if (rec.is_discarded())
        throw Error("passk", "corrupt record in " + cfg.passk.tasks_file);
      tasks.push_back({rec.at("id").get<std::string>(),
                       rec.at("prompt").get<std::string>(),
                       rec.at("canonical_output").get<std::string>()});
    }
    if (tasks.empty())
      throw Error("passk", "tasks file " + cfg.passk.tasks_file + " is empty");

    ModelRegistry registry(out_path(cfg, "models"));
    for (const auto& spec : cfg.models) {
      std::string name = model_name_for(cfg, spec);
      if (!registry.has(name))
        throw Error("pipeline",
                    "model '" + name + "' not found; run 'train' first");
      ModelParams params = registry.get(name);

      std::vector<Prompt> prompts;
      for (const auto& task : tasks) {
        Prompt p;
        p.id = task.id;
        p.text = task.prompt;
        p.token_len = static_cast<int>(task.prompt.size());
        prompts.push_back(std::move(p));
      }
      SamplingConfig sampling = cfg.sampling;
      sampling.n_generations = cfg.passk.n;
      sampling.seed = derive_seed(cfg.seed, {"passk", name});
      auto records = run_extraction(params, name, prompts, sampling);

      std::vector<json> gen_records;
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        const auto& rec = records[t];
        gen_records.push_back(generation_to_json(rec));
        int c = 0;
        for (const auto& sample : rec.samples)
          if (exact_match_pass(sample, tasks[t].canonical)) ++c;
        rows.push_back({{"model", name},
                        {"task", tasks[t].id},
                        {"n", cfg.passk.n},
                        {"c", c}});
      }
      write_artifact(cfg,
                     "generations/passk_" + sanitize_task_id(name) + ".jsonl",
                     "passk", gen_records);
    }
  }

  write_artifact(cfg, "audit/passk.jsonl", "passk", rows);
}

void run_report(const RunConfig& cfg) {
  ReportInput input;
  input.org_order = org_ids(cfg);

  for (const auto& rec : read_artifact(cfg, "stats/stats.jsonl", "stats")) {
    StatsReportRow row;
    row.org_id = rec.at("org").get<std::string>();
    row.files = rec.at("files").get<std::size_t>();
    row.bytes = rec.at("bytes").get<std::size_t>();
    row.loc = rec.at("loc").get<std::size_t>();
    row.classes = rec.at("classes").get<std::size_t>();
    row.functions = rec.at("functions").get<std::size_t>();
    row.docstrings = rec.at("docstrings").get<std::size_t>();
    row.clone_blocks = rec.at("clone_blocks").get<std::size_t>();
    row.clone_loc = rec.at("clone_loc").get<std::size_t>();
    const auto& mb = rec.at("per_mb");
    row.per_mb.loc_per_mb = mb.at("loc").get<double>();
    row.per_mb.classes_per_mb = mb.at("classes").get<double>();
    row.per_mb.funcs_per_mb = mb.at("funcs").get<double>();
    row.per_mb.docs_per_mb = mb.at("docs").get<double>();
    row.per_mb.clone_blocks_per_mb = mb.at("clone_blocks").get<double>();
    row.per_mb.clone_loc_per_mb = mb.at("clone_loc").get<double>();
    input.stats.push_back(std::move(row));
  }

  for (const auto& rec :
       read_artifact(cfg, "models/effectiveness.jsonl", "train")) {
    EffectivenessRow row;
    row.model = rec.at("model").get<std::string>();
    for (const auto& org : input.org_order) {
      if (rec.at("ppl").contains(org))
        row.org_ppl.emplace_back(org, rec.at("ppl").at(org).get<double>());
    }
    row.pooled_ppl = rec.at("pooled").get<double>();
    input.effectiveness.push_back(std::move(row));
  }

  {
    auto records = read_artifact(cfg, "audit/passk.jsonl", "passk");
    std::vector<std::string> model_order;
    std::map<std::string, std::vector<std::pair<int, int>>> counts;
    for (const auto& rec : records) {
      std::string model = rec.at("model").get<std::string>();
      if (!counts.count(model)) model_order.push_back(model);
      counts[model].emplace_back(rec.at("n").get<int>(), rec.at("c").get<int>());
    }
    for (const auto& model : model_order) {
      PassAtKRow row;
      row.model = model;
      for (int k : cfg.passk.k) {
        double sum = 0.0;
        std::size_t used = 0;
        for (auto [n, c] : counts[model]) {
          if (k > n) continue;
          sum += pass_at_k({n, c, k});
          ++used;
        }
        if (used > 0)
          row.mean_at_k.emplace_back(k, sum / static_cast<double>(used));
      }
      if (!row.mean_at_k.empty()) input.pass_at_k.push_back(std::move(row));
    }
  }

  {
    auto records = read_artifact(cfg, "audit/memorization.jsonl", "audit");
    std::vector<std::string> model_order;
    std::map<std::string, MemorizationReport> by_model;
    for (const auto& rec : records) {
      std::string model = rec.at("model").get<std::string>();
      if (!by_model.count(model)) {
        model_order.push_back(model);
        by_model[model].model_name = model;
      }
      MemorizationRow row;
      row.org_id = rec.at("org").get<std::string>();
      row.lines_of_gen = rec.at("lines_of_gen").get<std::size_t>();
      row.mem_blocks = rec.at("mem_blocks").get<std::size_t>();
      row.mem_lines = rec.at("mem_lines").get<std::size_t>();
      row.mem_ratio = rec.at("ratio").get<double>();
      by_model[model].rows.push_back(std::move(row));
    }
    for (const auto& model : model_order)
      input.memorization.push_back(std::move(by_model[model]));
  }

  for (const auto& rec : read_artifact(cfg, "audit/crossorg.jsonl", "crossorg")) {
    CrossOrgRow row;
    row.model = rec.at("model").get<std::string>();
    row.result.lines_of_gen = rec.at("lines_of_gen").get<std::size_t>();
    row.result.mem_blocks = rec.at("mem_blocks").get<std::size_t>();
    row.result.mem_lines = rec.at("mem_lines").get<std::size_t>();
    row.result.ratio = rec.at("ratio").get<double>();
    input.cross_org.push_back(std::move(row));
  }

  std::string text = render_report(input);
  std::ostringstream with_meta;
  with_meta << "Run " << config_hash_hex(cfg) << " (seed " << cfg.seed
            << ")\n\n"
            << text;
  write_text_atomic(out_path(cfg, "report/report.txt"), with_meta.str());
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{
      "ingest", "dedup",    "stats",  "clones", "prompts", "train",
      "generate", "audit", "crossorg", "passk", "report"};
  return names;
}

void run_stage(const std::string& name, const RunConfig& cfg) {
  if (name == "ingest") return run_ingest(cfg);
  if (name == "dedup") return run_dedup(cfg);
  if (name == "stats") return run_stats(cfg);
  if (name == "clones") return run_clones(cfg);
  if (name == "prompts") return run_prompts(cfg);
  if (name == "train") return run_train(cfg);
  if (name == "generate") return run_generate(cfg);
  if (name == "audit") return run_audit(cfg);
  if (name == "crossorg") return run_crossorg(cfg);
  if (name == "passk") return run_passk(cfg);
  if (name == "report") return run_report(cfg);
  throw Error("cli", "unknown stage '" + name + "'");
}

}  // namespace colabmem
