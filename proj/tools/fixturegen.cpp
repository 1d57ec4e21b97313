#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "colabmem/common.hpp"
#include "colabmem/fixture.hpp"
#include "json.hpp"

int main(int argc, char** argv) {
  CLI::App app{"generate the synthetic three-org corpus"};

  std::string out;
  colabmem::FixtureOptions opts;
  app.add_option("--out", out, "fixture root directory")->required();
  app.add_option("--seed", opts.seed, "generator seed");
  app.add_option("--files", opts.files_per_org, "files per org");
  app.add_option("--file-bytes", opts.target_file_bytes,
                 "minimum bytes per file");
  app.add_option("--dup-copies", opts.dup_copies,
                 "copies of org B's duplicated function");
  app.add_option("--helper-copies", opts.helper_copies,
                 "per-org helper repeats");
  app.add_option("--crossorg-copies", opts.crossorg_copies,
                 "host files per org for the shared function");
  app.add_option("--doc-fraction", opts.docstring_fraction,
                 "fraction of functions given a docstring");

  CLI11_PARSE(app, argc, argv);

  try {
    auto manifest = colabmem::write_fixture(out, opts);
    nlohmann::json summary{
        {"root", out},
        {"orgs", manifest.org_ids},
        {"functions", manifest.total_functions},
        {"documented", manifest.documented_functions},
        {"dup_hosts", manifest.dup_host_files},
        {"crossorg_hosts", manifest.crossorg_host_files},
        {"bytes",
         {manifest.bytes_per_org[0], manifest.bytes_per_org[1],
          manifest.bytes_per_org[2]}}};
    std::printf("%s\n", summary.dump().c_str());
    return 0;
  } catch (const colabmem::Error& err) {
    nlohmann::json rec{
        {"error", {{"kind", err.kind()}, {"message", err.what()}}}};
    std::fprintf(stderr, "%s\n", rec.dump().c_str());
    return 1;
  }
}
