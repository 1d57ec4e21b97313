#include "colabmem/dedup.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "colabmem/common.hpp"

namespace colabmem {

namespace {

constexpr std::uint64_t kMersenne61 = (1ULL << 61) - 1;
constexpr char kTokenSep = '\x1f';

std::uint64_t mulmod61(std::uint64_t a, std::uint64_t b) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(a) * b) % kMersenne61);
}

}  // namespace

std::vector<std::uint64_t> shingles(std::string_view text, int k) {
  if (k < 1) throw Error("config", "shingle size must be >= 1");
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() &&
           std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    std::size_t start = i;
    while (i < text.size() &&
           !std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    if (i > start) tokens.push_back(text.substr(start, i - start));
  }
  std::vector<std::uint64_t> out;
  if (tokens.size() < static_cast<std::size_t>(k)) return out;
  out.reserve(tokens.size() - k + 1);
  for (std::size_t s = 0; s + k <= tokens.size(); ++s) {
    std::uint64_t h = kFnvOffset;
    for (int j = 0; j < k; ++j) {
      h = fnv1a64(tokens[s + j], h);
      h ^= static_cast<unsigned char>(kTokenSep);
      h *= kFnvPrime;
    }
    out.push_back(h);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

MinHashSignature signature(const std::vector<std::uint64_t>& shingle_set,
                           int num_perm, std::uint64_t seed) {
  if (num_perm < 8) throw Error("config", "num_perm must be >= 8");
  MinHashSignature sig;
  sig.num_permutations = static_cast<std::uint32_t>(num_perm);
  sig.seed = seed;
  sig.values.assign(num_perm, std::numeric_limits<std::uint64_t>::max());
  // Permutations h -> (a*h + b) mod (2^61 - 1), coefficients seeded once.
  Rng rng(derive_seed(seed, {"minhash-perms"}));
  std::vector<std::uint64_t> as(num_perm), bs(num_perm);
  for (int i = 0; i < num_perm; ++i) {
    as[i] = 1 + rng.below(kMersenne61 - 1);
    bs[i] = rng.below(kMersenne61);
  }
  for (std::uint64_t h : shingle_set) {
    std::uint64_t hm = h % kMersenne61;
    for (int i = 0; i < num_perm; ++i) {
      std::uint64_t v = mulmod61(as[i], hm) + bs[i];
      if (v >= kMersenne61) v -= kMersenne61;
      if (v < sig.values[i]) sig.values[i] = v;
    }
  }
  return sig;
}

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
  if (a.num_permutations != b.num_permutations || a.seed != b.seed) {
    throw Error("config", "signatures built with different parameters");
  }
  if (a.num_permutations == 0) throw Error("config", "empty signature");
  std::size_t matches = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i] == b.values[i]) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(a.values.size());
}

double exact_jaccard(const std::vector<std::uint64_t>& a,
                     const std::vector<std::uint64_t>& b) {
  // Inputs are sorted-unique as produced by shingles().
  std::size_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  std::size_t uni = a.size() + b.size() - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::pair<int, int> choose_bands(int num_perm, double threshold) {
  if (num_perm < 1) {
    throw Error("config",
                "cannot factor num_perm=" + std::to_string(num_perm) +
                    " into bands");
  }
  int best_b = -1, best_r = -1;
  double best_score = std::numeric_limits<double>::infinity();
  for (int b = 1; b <= num_perm; ++b) {
    if (num_perm % b != 0) continue;
    int r = num_perm / b;
    double curve = std::pow(1.0 / b, 1.0 / r);
    double score = std::abs(curve - threshold);
    if (score < best_score) {
      best_score = score;
      best_b = b;
      best_r = r;
    }
  }
  return {best_b, best_r};
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::pair<OrgCorpus, std::vector<DuplicateGroup>> lsh_dedup(
    const OrgCorpus& corpus, const DedupOptions& opts) {
  if (!(opts.threshold > 0.0 && opts.threshold < 1.0)) {
    throw Error("config", "dedup threshold must lie in (0, 1)");
  }
  auto [bands, rows] = choose_bands(opts.num_perm, opts.threshold);
  const int n = static_cast<int>(corpus.files.size());
  std::vector<MinHashSignature> sigs;
  sigs.reserve(n);
  for (const auto& f : corpus.files) {
    sigs.push_back(
        signature(shingles(f.text, opts.shingle_k), opts.num_perm, opts.seed));
  }
  UnionFind uf(n);
  for (int band = 0; band < bands; ++band) {
    std::unordered_map<std::uint64_t, std::vector<int>> buckets;
    for (int i = 0; i < n; ++i) {
      std::uint64_t h = fnv1a64_u64(static_cast<std::uint64_t>(band));
      for (int r = 0; r < rows; ++r) {
        h = fnv1a64_u64(sigs[i].values[band * rows + r], h);
      }
      buckets[h].push_back(i);
    }
    for (const auto& [key, members] : buckets) {
      if (members.size() < 2) continue;
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) {
          int i = members[a], j = members[b];
          if (uf.find(i) == uf.find(j)) continue;
          if (estimate_jaccard(sigs[i], sigs[j]) >= opts.threshold) {
            uf.unite(i, j);
          }
        }
      }
    }
  }
  std::unordered_map<int, std::vector<int>> components;
  for (int i = 0; i < n; ++i) components[uf.find(i)].push_back(i);

  std::vector<SourceFile> kept;
  std::vector<DuplicateGroup> groups;
  std::vector<bool> keep(n, false);
  for (auto& [root, members] : components) {
    // Files are already in lexicographic path order, so the first member of
    // each component carries the smallest path.
    std::sort(members.begin(), members.end());
    keep[members.front()] = true;
    if (members.size() >= 2) {
      DuplicateGroup g;
      g.kept_path = corpus.files[members.front()].path;
      for (std::size_t m = 1; m < members.size(); ++m) {
        g.dropped_paths.push_back(corpus.files[members[m]].path);
      }
      groups.push_back(std::move(g));
    }
  }
  std::sort(groups.begin(), groups.end(),
            [](const DuplicateGroup& a, const DuplicateGroup& b) {
              return a.kept_path < b.kept_path;
            });
  for (int i = 0; i < n; ++i) {
    if (keep[i]) kept.push_back(corpus.files[i]);
  }
  return {make_corpus(corpus.org_id, std::move(kept), corpus.split),
          std::move(groups)};
}

}  // namespace colabmem
