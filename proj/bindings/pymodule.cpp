#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "colabmem/clones.hpp"
#include "colabmem/common.hpp"
#include "colabmem/config.hpp"
#include "colabmem/corpus.hpp"
#include "colabmem/dedup.hpp"
#include "colabmem/fixture.hpp"
#include "colabmem/metrics.hpp"
#include "colabmem/pipeline.hpp"
#include "colabmem/pysurface.hpp"
#include "colabmem/tinylm.hpp"

namespace py = pybind11;
using namespace colabmem;

namespace {

OrgCorpus corpus_from_texts(const std::vector<std::string>& texts,
                            const std::string& org) {
  std::vector<SourceFile> files;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "t%04zu.py", i);
    files.push_back(make_source_file(name, texts[i]));
  }
  return make_corpus(org, std::move(files));
}

py::dict block_to_dict(const CloneBlock& block) {
  py::dict d;
  d["line_count"] = block.line_count;
  d["lines"] = block.normalized_lines;
  py::list occs;
  for (const auto& occ : block.occurrences) {
    py::dict o;
    o["source_id"] = occ.source_id;
    o["path"] = occ.path;
    o["start_line"] = occ.start_line;
    occs.append(o);
  }
  d["occurrences"] = occs;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "training and memorization-audit toolkit";
  py::register_exception<Error>(m, "ToolkitError");

  m.def(
      "normalize_lines",
      [](const std::string& text) { return normalize_lines(text).lines; },
      py::arg("text"),
      "Trimmed non-blank lines, the universe clone detection works in.");

  m.def(
      "detect_clones",
      [](const std::vector<std::pair<std::string, std::string>>& files,
         int min_lines) {
        std::vector<SourceFile> sources;
        for (const auto& [path, text] : files)
          sources.push_back(make_source_file(path, text));
        OrgCorpus corpus = make_corpus("py", std::move(sources));
        auto blocks =
            detect_clones({to_clone_source(corpus)}, CloneConfig{min_lines});
        py::list out;
        for (const auto& b : blocks) out.append(block_to_dict(b));
        return out;
      },
      py::arg("files"), py::arg("min_lines") = 6,
      "Maximal repeated line blocks over (path, text) pairs.");

  m.def(
      "jaccard",
      [](const std::string& a, const std::string& b, int k) {
        return exact_jaccard(shingles(a, k), shingles(b, k));
      },
      py::arg("a"), py::arg("b"), py::arg("k") = 5,
      "Exact Jaccard similarity of the token shingle sets.");

  m.def(
      "extract_functions",
      [](const std::string& text) {
        auto records = extract_functions(make_source_file("m.py", text));
        py::list out;
        for (const auto& rec : records) {
          py::dict d;
          d["signature"] = rec.signature;
          d["docstring"] =
              rec.docstring ? py::object(py::str(*rec.docstring)) : py::none();
          d["body"] = rec.body;
          d["start_line"] = rec.start_line;
          out.append(d);
        }
        return out;
      },
      py::arg("text"), "def statements with docstring and body extents.");

  m.def(
      "pass_at_k",
      [](int n, int c, int k) { return pass_at_k({n, c, k}); }, py::arg("n"),
      py::arg("c"), py::arg("k"),
      "Unbiased pass@k estimate from n samples with c passes.");

  m.def(
      "compression_entropy",
      [](const std::string& text) { return compression_entropy(text); },
      py::arg("text"), "Raw DEFLATE byte length of the text.");

  m.def("sample_size", &sample_size, py::arg("n"), py::arg("fraction"),
        "Round-half-up sample size used by prompt sampling.");

  py::class_<ModelParams>(m, "Model")
      .def_static(
          "init",
          [](int context_len, int d_model, int n_heads, int n_layers,
             std::uint64_t seed) {
            ArchConfig arch;
            arch.context_len = context_len;
            arch.d_model = d_model;
            arch.n_heads = n_heads;
            arch.n_layers = n_layers;
            return init_model(arch, seed);
          },
          py::arg("context_len") = 128, py::arg("d_model") = 32,
          py::arg("n_heads") = 2, py::arg("n_layers") = 2,
          py::arg("seed") = 42)
      .def_property_readonly("param_count", &ModelParams::param_count)
      .def(
          "train_texts",
          [](const ModelParams& self, const std::vector<std::string>& texts,
             int epochs, int batch_size, double lr, std::uint64_t seed) {
            TrainHyper hyper;
            hyper.epochs = epochs;
            hyper.batch_size = batch_size;
            hyper.lr = lr;
            return train(self, corpus_from_texts(texts, "py"), hyper, seed);
          },
          py::arg("texts"), py::arg("epochs") = 5, py::arg("batch_size") = 2,
          py::arg("lr") = 5e-4, py::arg("seed") = 42,
          "Returns a newly trained snapshot; the receiver is unchanged.")
      .def(
          "generate",
          [](const ModelParams& self, const std::string& prompt,
             double temperature, double top_p, int n, int max_new_tokens,
             std::uint64_t seed) {
            SamplingConfig cfg;
            cfg.temperature = temperature;
            cfg.top_p = top_p;
            cfg.n_generations = n;
            cfg.max_new_tokens = max_new_tokens;
            cfg.seed = seed;
            auto out = generate(self, tokenize(prompt), cfg);
            // Samples are raw byte strings and need not be valid UTF-8.
            py::list texts;
            for (const auto& tokens : out) texts.append(py::bytes(detokenize(tokens)));
            return texts;
          },
          py::arg("prompt"), py::arg("temperature") = 0.6,
          py::arg("top_p") = 0.6, py::arg("n") = 1,
          py::arg("max_new_tokens") = 0, py::arg("seed") = 42)
      .def(
          "perplexity",
          [](const ModelParams& self, const std::string& text) {
            return perplexity_text(self, text);
          },
          py::arg("text"))
      .def(
          "save",
          [](const ModelParams& self, const std::string& path) {
            save_checkpoint(path, self);
          },
          py::arg("path"))
      .def_static(
          "load",
          [](const std::string& path) { return load_checkpoint(path); },
          py::arg("path"));

  m.def(
      "run_stage",
      [](const std::string& stage, const std::string& config_path,
         const std::vector<std::string>& overrides) {
        RunConfig cfg = load_config_with_overrides(config_path, overrides,
                                                   nullptr, nullptr);
        run_stage(stage, cfg);
        return config_hash_hex(cfg);
      },
      py::arg("stage"), py::arg("config_path"),
      py::arg("overrides") = std::vector<std::string>{},
      "Run one pipeline stage; returns the config hash.");

  m.def(
      "write_fixture",
      [](const std::string& root, std::uint64_t seed, int files_per_org,
         int target_file_bytes) {
        FixtureOptions opts;
        opts.seed = seed;
        opts.files_per_org = files_per_org;
        opts.target_file_bytes = target_file_bytes;
        auto manifest = write_fixture(root, opts);
        py::dict d;
        d["orgs"] = manifest.org_ids;
        d["functions"] = manifest.total_functions;
        d["documented"] = manifest.documented_functions;
        d["dup_hosts"] = manifest.dup_host_files;
        return d;
      },
      py::arg("root"), py::arg("seed") = 42, py::arg("files_per_org") = 40,
      py::arg("target_file_bytes") = 2300,
      "Write the synthetic three-org corpus.");
}
