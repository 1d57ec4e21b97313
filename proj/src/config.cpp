#include "colabmem/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "colabmem/common.hpp"
#include "json.hpp"

namespace colabmem {
namespace {

using nlohmann::json;

void check_keys(const json& obj, std::string_view where,
                std::initializer_list<std::string_view> allowed) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (auto key : allowed) {
      if (item.key() == key) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw Error("config", "unknown key '" + item.key() + "' in " +
                                std::string(where));
    }
  }
}

template <typename T>
void take(const json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) out = it->get<T>();
}

ModelSpec parse_model_spec(const std::string& raw) {
  ModelSpec spec;
  spec.raw = raw;
  auto colon = raw.find(':');
  spec.strategy = raw.substr(0, colon);
  std::string arg = colon == std::string::npos ? "" : raw.substr(colon + 1);
  if (spec.strategy == "centralized" || spec.strategy == "fedavg" ||
      spec.strategy == "fedyogi") {
    if (!arg.empty())
      throw Error("config", "model '" + raw + "' takes no argument");
  } else if (spec.strategy == "incremental") {
    if (arg.empty())
      throw Error("config", "model '" + raw + "' needs an org order, "
                            "e.g. incremental:A2B2C");
    std::string part;
    std::stringstream ss(arg);
    while (std::getline(ss, part, '2')) {
      if (part.empty())
        throw Error("config", "bad org order in model '" + raw + "'");
      spec.order.push_back(part);
    }
    if (spec.order.size() < 2)
      throw Error("config", "model '" + raw + "' needs at least two orgs");
  } else if (spec.strategy == "only") {
    if (arg.empty())
      throw Error("config", "model '" + raw + "' needs an org id");
    spec.order.push_back(arg);
  } else {
    throw Error("config", "unknown model strategy '" + spec.strategy + "'");
  }
  return spec;
}

json normalize_for_hash(json root) {
  root.erase("out_dir");
  return root;
}

RunConfig from_json(const json& root) {
  if (!root.is_object()) throw Error("config", "top level must be an object");
  check_keys(root, "config",
             {"seed", "out_dir", "orgs", "source_suffix", "filter", "dedup",
              "split", "clones", "arch", "train", "sampling", "prompts",
              "passk"});

  RunConfig cfg;
  take(root, "seed", cfg.seed);
  take(root, "out_dir", cfg.out_dir);
  take(root, "source_suffix", cfg.source_suffix);

  if (!root.contains("orgs") || !root["orgs"].is_array() ||
      root["orgs"].empty()) {
    throw Error("config", "'orgs' must be a non-empty array");
  }
  std::set<std::string> seen;
  for (const auto& entry : root["orgs"]) {
    check_keys(entry, "orgs[]", {"id", "dir"});
    OrgSource org;
    take(entry, "id", org.id);
    take(entry, "dir", org.dir);
    if (org.id.empty() || org.dir.empty())
      throw Error("config", "each org needs a non-empty 'id' and 'dir'");
    if (!seen.insert(org.id).second)
      throw Error("config", "duplicate org id '" + org.id + "'");
    cfg.orgs.push_back(std::move(org));
  }

  if (auto it = root.find("filter"); it != root.end()) {
    check_keys(*it, "filter",
               {"min_alnum_fraction", "generated_marker", "marker_line_window"});
    take(*it, "min_alnum_fraction", cfg.filter.min_alnum_fraction);
    take(*it, "generated_marker", cfg.filter.generated_marker);
    take(*it, "marker_line_window", cfg.filter.marker_line_window);
  }
  if (auto it = root.find("dedup"); it != root.end()) {
    check_keys(*it, "dedup", {"threshold", "num_perm", "shingle_k"});
    take(*it, "threshold", cfg.dedup.threshold);
    take(*it, "num_perm", cfg.dedup.num_perm);
    take(*it, "shingle_k", cfg.dedup.shingle_k);
  }
  if (auto it = root.find("split"); it != root.end()) {
    check_keys(*it, "split", {"train_fraction"});
    take(*it, "train_fraction", cfg.train_fraction);
  }
  cfg.crossorg_eval.min_lines = 3;
  if (auto it = root.find("clones"); it != root.end()) {
    check_keys(*it, "clones", {"min_lines", "crossorg_eval_min_lines"});
    take(*it, "min_lines", cfg.clones.min_lines);
    take(*it, "crossorg_eval_min_lines", cfg.crossorg_eval.min_lines);
  }
  if (auto it = root.find("arch"); it != root.end()) {
    check_keys(*it, "arch",
               {"vocab_size", "context_len", "d_model", "n_heads", "n_layers",
                "ffn_mult"});
    take(*it, "vocab_size", cfg.arch.vocab_size);
    take(*it, "context_len", cfg.arch.context_len);
    take(*it, "d_model", cfg.arch.d_model);
    take(*it, "n_heads", cfg.arch.n_heads);
    take(*it, "n_layers", cfg.arch.n_layers);
    take(*it, "ffn_mult", cfg.arch.ffn_mult);
  }
  if (auto it = root.find("train"); it != root.end()) {
    check_keys(*it, "train",
               {"batch_size", "lr", "beta1", "beta2", "eps",
                "centralized_epochs", "incremental_epochs", "federated_rounds",
                "federated_local_epochs", "client_weights", "models"});
    take(*it, "batch_size", cfg.hyper.batch_size);
    take(*it, "lr", cfg.hyper.lr);
    take(*it, "beta1", cfg.hyper.beta1);
    take(*it, "beta2", cfg.hyper.beta2);
    take(*it, "eps", cfg.hyper.eps);
    take(*it, "centralized_epochs", cfg.centralized_epochs);
    take(*it, "incremental_epochs", cfg.incremental_epochs);
    take(*it, "federated_rounds", cfg.federated_rounds);
    take(*it, "federated_local_epochs", cfg.federated_local_epochs);
    take(*it, "client_weights", cfg.client_weights);
    if (auto m = it->find("models"); m != it->end()) {
      for (const auto& raw : *m)
        cfg.models.push_back(parse_model_spec(raw.get<std::string>()));
    }
  }
  if (cfg.models.empty()) {
    cfg.models.push_back(parse_model_spec("centralized"));
    cfg.models.push_back(parse_model_spec("fedavg"));
    cfg.models.push_back(parse_model_spec("fedyogi"));
    std::string order;
    for (const auto& org : cfg.orgs) {
      if (!order.empty()) order += '2';
      order += org.id;
    }
    if (cfg.orgs.size() >= 2)
      cfg.models.push_back(parse_model_spec("incremental:" + order));
    for (const auto& org : cfg.orgs)
      cfg.models.push_back(parse_model_spec("only:" + org.id));
  }
  if (auto it = root.find("sampling"); it != root.end()) {
    check_keys(*it, "sampling",
               {"temperature", "top_p", "n_generations", "max_new_tokens"});
    take(*it, "temperature", cfg.sampling.temperature);
    take(*it, "top_p", cfg.sampling.top_p);
    take(*it, "n_generations", cfg.sampling.n_generations);
    take(*it, "max_new_tokens", cfg.sampling.max_new_tokens);
  }
  if (auto it = root.find("prompts"); it != root.end()) {
    check_keys(*it, "prompts", {"sample_fraction"});
    take(*it, "sample_fraction", cfg.prompt_fraction);
  }
  if (auto it = root.find("passk"); it != root.end()) {
    check_keys(*it, "passk", {"n", "k", "tasks_file", "counts"});
    take(*it, "n", cfg.passk.n);
    take(*it, "tasks_file", cfg.passk.tasks_file);
    if (auto k = it->find("k"); k != it->end()) {
      cfg.passk.k.clear();
      for (const auto& v : *k) cfg.passk.k.push_back(v.get<int>());
    }
    if (auto c = it->find("counts"); c != it->end()) {
      for (const auto& v : *c) {
        if (!v.is_array() || v.size() != 2)
          throw Error("config", "passk.counts entries must be [n, c] pairs");
        cfg.passk.counts.emplace_back(v[0].get<int>(), v[1].get<int>());
      }
    }
  }

  for (const auto& spec : cfg.models) {
    for (const auto& org : spec.order) {
      if (!seen.count(org))
        throw Error("config",
                    "model '" + spec.raw + "' references unknown org '" +
                        org + "'");
    }
  }

  cfg.dedup.seed = cfg.seed;
  cfg.sampling.seed = cfg.seed;
  cfg.config_hash = fnv1a64(normalize_for_hash(root).dump());
  return cfg;
}

json parse_json_text(const std::string& text, const std::string& what) {
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded()) throw Error("config", "invalid JSON in " + what);
  return root;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  return from_json(parse_json_text(json_text, "config"));
}

RunConfig load_config(const std::filesystem::path& path) {
  return load_config_with_overrides(path, {}, nullptr, nullptr);
}

RunConfig load_config_with_overrides(const std::filesystem::path& path,
                                     const std::vector<std::string>& overrides,
                                     const std::string* seed_override,
                                     const std::string* out_override) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json root = parse_json_text(buf.str(), path.string());

  auto apply = [&root](const std::string& dotted, const std::string& value) {
    json* node = &root;
    std::string rest = dotted;
    for (auto dot = rest.find('.'); dot != std::string::npos;
         dot = rest.find('.')) {
      std::string head = rest.substr(0, dot);
      rest = rest.substr(dot + 1);
      if (!node->contains(head)) (*node)[head] = json::object();
      node = &(*node)[head];
    }
    json parsed = json::parse(value, nullptr, false);
    (*node)[rest] = parsed.is_discarded() ? json(value) : parsed;
  };

  for (const auto& entry : overrides) {
    auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0)
      throw Error("config", "override must look like key.path=value: " + entry);
    apply(entry.substr(0, eq), entry.substr(eq + 1));
  }
  if (seed_override) apply("seed", *seed_override);
  if (out_override) root["out_dir"] = *out_override;

  RunConfig cfg = from_json(root);
  // Data paths travel with the config file; out_dir stays cwd-relative.
  std::filesystem::path base = path.parent_path();
  for (auto& org : cfg.orgs) org.dir = (base / org.dir).string();
  if (!cfg.passk.tasks_file.empty())
    cfg.passk.tasks_file = (base / cfg.passk.tasks_file).string();
  return cfg;
}

std::string config_hash_hex(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(cfg.config_hash));
  return buf;
}

}  // namespace colabmem
