#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "colabmem/common.hpp"
#include "colabmem/pipeline.hpp"
#include "json.hpp"

namespace {

struct StageHelp {
  const char* name;
  const char* help;
};

constexpr StageHelp kStages[] = {
    {"ingest", "walk org directories, decode and filter source files"},
    {"dedup", "near-duplicate removal and train/validation split"},
    {"stats", "per-org surface and clone statistics on the train split"},
    {"clones", "clone blocks shared across org train splits"},
    {"prompts", "function prompts (sampled) and clone-prefix prompts"},
    {"train", "train all configured models into the registry"},
    {"generate", "sample continuations for every model and prompt"},
    {"audit", "match generations against each org's train split"},
    {"crossorg", "score clone-prefix continuations against suffixes"},
    {"passk", "toy exact-match tasks scored with pass@k"},
    {"report", "render the combined text report"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"collaborative code-model training and memorization audit"};
  app.require_subcommand(1);

  struct Args {
    std::string config;
    std::string seed;
    std::string out;
    std::vector<std::string> sets;
  } args;

  std::string chosen;
  for (const auto& stage : kStages) {
    auto* sub = app.add_subcommand(stage.name, stage.help);
    sub->add_option("--config", args.config, "run configuration (JSON)")
        ->required();
    sub->add_option("--seed", args.seed, "override the global seed");
    sub->add_option("--out", args.out, "override the output directory");
    sub->add_option("--set", args.sets,
                    "override any config key, e.g. --set train.lr=1e-3");
    sub->callback([&chosen, name = std::string(stage.name)] { chosen = name; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    colabmem::RunConfig cfg = colabmem::load_config_with_overrides(
        args.config, args.sets, args.seed.empty() ? nullptr : &args.seed,
        args.out.empty() ? nullptr : &args.out);
    colabmem::run_stage(chosen, cfg);
    nlohmann::json ok{{"status", "ok"},
                      {"stage", chosen},
                      {"config_hash", colabmem::config_hash_hex(cfg)},
                      {"out_dir", cfg.out_dir}};
    std::printf("%s\n", ok.dump().c_str());
    return 0;
  } catch (const colabmem::Error& err) {
    nlohmann::json rec{
        {"error", {{"kind", err.kind()}, {"message", err.what()}}}};
    std::fprintf(stderr, "%s\n", rec.dump().c_str());
    return 1;
  } catch (const std::exception& ex) {
    nlohmann::json rec{
        {"error", {{"kind", "internal"}, {"message", ex.what()}}}};
    std::fprintf(stderr, "%s\n", rec.dump().c_str());
    return 3;
  }
}
