#include "colabmem/fixture.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "colabmem/common.hpp"
#include "json.hpp"

namespace colabmem {
namespace {

namespace fs = std::filesystem;

const std::string kDupFunction = R"(def refresh_cache_entry(key, value):
    """Update one cache slot and its stats."""
    slot = hash(key) % 64
    bucket = CACHE[slot]
    if bucket is None:
        bucket = []
        CACHE[slot] = bucket
    for pair in bucket:
        if pair[0] == key:
            pair[1] = value
            HITS[slot] += 1
            return pair
    entry = [key, value]
    bucket.append(entry)
    MISSES[slot] += 1
    if len(bucket) > 8:
        bucket.pop(0)
        EVICTS[slot] += 1
    TOUCH[slot] = STEP[0]
    return entry
)";

const std::string kDupConstants = R"(CACHE = [None] * 64
HITS = [0] * 64
MISSES = [0] * 64
EVICTS = [0] * 64
TOUCH = [0] * 64
STEP = [0]
)";

const std::string kCrossOrgFunction = R"(def decode_frame(buf):
    """Split a frame into tag, size, payload."""
    tag = buf[0]
    size = buf[1] << 8 | buf[2]
    body = buf[3:3 + size]
    if len(body) != size:
        raise ValueError("short frame")
    crc = buf[3 + size]
    folded = 0
    for byte in body:
        folded ^= byte
    if folded != crc:
        raise ValueError("bad crc")
    return tag, size, bytes(body)
)";

std::string helper_function(std::string_view org) {
  std::string o(org);
  for (char& c : o) c = static_cast<char>(std::tolower(c));
  std::ostringstream out;
  out << "def pack_" << o << "_header(row):\n"
      << "    width_" << o << " = 16\n"
      << "    label_" << o << " = \"" << org << "\"\n"
      << "    head_" << o << " = [label_" << o << "]\n"
      << "    for cell_" << o << " in row:\n"
      << "        text_" << o << " = str(cell_" << o << ")\n"
      << "        head_" << o << ".append(text_" << o << "[:width_" << o
      << "])\n"
      << "    tail_" << o << " = \"|\".join(head_" << o << ")\n"
      << "    return tail_" << o << ".upper()\n";
  return out.str();
}

const char* kVerbs[] = {"calc", "fold", "scan",  "merge",
                        "probe", "shift", "rank", "trim"};

const char* kDocTemplates[] = {
    "Fold field %d into the running total.",
    "Scan the pair list for block %d.",
    "Mix the shard %d counters.",
    "Reduce window %d to a checksum.",
    "Walk bucket %d and merge hits.",
};

std::string make_doc(Rng& rng, int tag) {
  char buf[96];
  std::snprintf(buf, sizeof(buf),
                kDocTemplates[rng.below(std::size(kDocTemplates))], tag);
  return buf;
}

// One synthetic function; tag-specific variable names keep lines unique
// across functions so the only long repeats are the planted ones.
std::string make_function(Rng& rng, std::string_view org, int tag,
                          bool docstring) {
  std::string lower(org);
  for (char& c : lower) c = static_cast<char>(std::tolower(c));
  std::string t = lower + std::to_string(tag);
  auto c = [&rng] { return std::to_string(2 + rng.below(96)); };

  std::ostringstream out;
  out << "def " << kVerbs[rng.below(std::size(kVerbs))] << "_" << t
      << "(a, b):\n";
  if (docstring) out << "    \"\"\"" << make_doc(rng, tag) << "\"\"\"\n";
  out << "    x" << t << " = a + " << c() << "\n"
      << "    y" << t << " = b * " << c() << "\n"
      << "    acc" << t << " = 0\n"
      << "    buf" << t << " = []\n";

  int units = 1 + static_cast<int>(rng.below(5));
  for (int u = 0; u < units; ++u) {
    switch (rng.below(7)) {
      case 0:
        out << "    x" << t << " = x" << t << " * " << c() << " + " << c()
            << "\n";
        break;
      case 1:
        out << "    y" << t << " = (y" << t << " + x" << t << ") % " << c()
            << "\n";
        break;
      case 2:
        out << "    acc" << t << " += x" << t << " - y" << t << "\n";
        break;
      case 3:
        out << "    buf" << t << ".append(y" << t << ")\n";
        break;
      case 4:
        out << "    if x" << t << " > y" << t << ":\n"
            << "        x" << t << ", y" << t << " = y" << t << ", x" << t
            << "\n";
        break;
      case 5:
        out << "    for step" << t << " in range(" << c() << "):\n"
            << "        acc" << t << " += step" << t << " % " << c() << "\n";
        break;
      default:
        out << "    if not buf" << t << ":\n"
            << "        buf" << t << ".append(" << c() << ")\n";
        break;
    }
  }
  out << "    return acc" << t << " + y" << t << "\n";
  return out.str();
}

std::string make_class(std::string_view org, int file_idx, int c) {
  std::ostringstream out;
  out << "class Mod" << org << file_idx << ":\n"
      << "    kind = \"" << org << file_idx << "\"\n"
      << "    limit = " << c << "\n";
  return out.str();
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << text;
}

void write_fodder(const fs::path& org_dir, std::string_view org) {
  std::string junk;
  for (int i = 0; i < 30; ++i) junk += "$$$ %%% ^^^ &&& ***\n";
  write_file(org_dir / "skip/low_alnum.py", junk);

  std::string generated = "# This file is Auto-Generated. Do not edit.\n";
  for (int i = 0; i < 10; ++i)
    generated += "FIELD_" + std::to_string(i) + " = " + std::to_string(i * 7) +
                 "\n";
  write_file(org_dir / "skip/generated_stub.py", generated);

  std::string base;
  for (int i = 0; i < 50; ++i) {
    base += "OPT_" + std::string(org) + "_" + std::to_string(i) + " = " +
            std::to_string(i * 3 + 1) + "\n";
  }
  write_file(org_dir / "dups/cfg_a.py", base + "DEFAULT = OPT_" +
                                            std::string(org) + "_0\n");
  write_file(org_dir / "dups/cfg_b.py", base + "DEFAULT = OPT_" +
                                            std::string(org) + "_1\n");

  write_file(org_dir / "skip/binary_blob.py", "data = \"\xC3\x28\xA0\xA1\"\n");
}

}  // namespace

const std::string& fixture_dup_function() { return kDupFunction; }
const std::string& fixture_crossorg_function() { return kCrossOrgFunction; }
std::string fixture_helper_function(std::string_view org_id) {
  return helper_function(org_id);
}

FixtureManifest write_fixture(const fs::path& root,
                              const FixtureOptions& opts) {
  FixtureManifest manifest;
  manifest.org_ids = {"A", "B", "C"};

  int tag = 0;
  for (int org_idx = 0; org_idx < 3; ++org_idx) {
    const std::string org = manifest.org_ids[org_idx];
    fs::path org_dir = root / "orgs" / org;

    // Deterministic spread of planted copies over file indices.
    std::set<int> dup_files, helper_files, cross_files;
    if (org == "B") {
      for (int i = 0; i < opts.dup_copies; ++i)
        dup_files.insert(1 + i * opts.files_per_org / opts.dup_copies);
    }
    for (int i = 0; i < opts.helper_copies; ++i)
      helper_files.insert(2 + i * opts.files_per_org / opts.helper_copies);
    if (org != "B") {
      for (int i = 0; i < opts.crossorg_copies; ++i)
        cross_files.insert(3 + i * opts.files_per_org / opts.crossorg_copies);
    }

    std::size_t org_bytes = 0;
    for (int fi = 0; fi < opts.files_per_org; ++fi) {
      Rng rng(derive_seed(opts.seed,
                          {"fixture", org, std::to_string(fi)}));
      std::ostringstream text;
      text << "\"\"\"Module " << (fi < 10 ? "0" : "") << fi << " in org "
           << org << " corpus.\"\"\"\n";
      if (dup_files.count(fi)) text << kDupConstants;
      text << "\n";
      if (rng.uniform01() < 0.3)
        text << make_class(org, fi, 2 + static_cast<int>(rng.below(96)))
             << "\n";

      bool planted_dup = false, planted_helper = false, planted_cross = false;
      while (static_cast<int>(text.str().size()) < opts.target_file_bytes) {
        if (dup_files.count(fi) && !planted_dup) {
          text << kDupFunction << "\n";
          planted_dup = true;
          continue;
        }
        if (cross_files.count(fi) && !planted_cross) {
          text << kCrossOrgFunction << "\n";
          planted_cross = true;
          continue;
        }
        if (helper_files.count(fi) && !planted_helper) {
          text << helper_function(org) << "\n";
          planted_helper = true;
          continue;
        }
        bool doc = rng.uniform01() < opts.docstring_fraction;
        text << make_function(rng, org, tag++, doc) << "\n";
        ++manifest.total_functions;
        if (doc) ++manifest.documented_functions;
      }

      char name[64];
      std::snprintf(name, sizeof(name), "src/mod_%s_%02d.py",
                    org == "A" ? "a" : (org == "B" ? "b" : "c"), fi);
      write_file(org_dir / name, text.str());
      org_bytes += text.str().size();
      if (planted_dup) manifest.dup_host_files.push_back(name);
      if (planted_cross)
        manifest.crossorg_host_files.push_back(org + "/" + name);
    }
    manifest.bytes_per_org[org_idx] = org_bytes;
    write_fodder(org_dir, org);
  }

  // Toy functional-correctness tasks over the planted functions.
  {
    using nlohmann::json;
    auto first_lines = [](const std::string& text, int keep) {
      std::istringstream in(text);
      std::string line, out;
      int n = 0;
      while (n < keep && std::getline(in, line)) {
        if (n >= 2) out += line + "\n";  // body only, skip def + docstring
        ++n;
      }
      return out;
    };
    std::ostringstream tasks;
    tasks << json{{"id", "task_cache"},
                  {"prompt",
                   "def refresh_cache_entry(key, value):\n    \"\"\"Update "
                   "one cache slot and its stats.\"\"\"\n"},
                  {"canonical_output", first_lines(kDupFunction, 8)}}
                 .dump()
          << '\n';
    tasks << json{{"id", "task_decode"},
                  {"prompt",
                   "def decode_frame(buf):\n    \"\"\"Split a frame into "
                   "tag, size, payload.\"\"\"\n"},
                  {"canonical_output", first_lines(kCrossOrgFunction, 6)}}
                 .dump()
          << '\n';
    write_file(root / "tasks.jsonl", tasks.str());
  }

  return manifest;
}

}  // namespace colabmem
