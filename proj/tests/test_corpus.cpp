#include <algorithm>
#include <cmath>
#include <set>

#include "colabmem/corpus.hpp"
#include "colabmem/common.hpp"
#include "doctest.h"
#include "tmpdir.hpp"

using namespace colabmem;
using testutil::TmpDir;

TEST_CASE("make_source_file records byte and line counts") {
  SourceFile f = make_source_file("a.py", "x = 1\ny = 2");
  CHECK(f.bytes == 11);
  CHECK(f.lines == 2);
}

TEST_CASE("make_corpus sorts by path and rejects duplicates") {
  auto c = make_corpus("org", {make_source_file("b.py", "x"),
                               make_source_file("a.py", "y")});
  CHECK(c.files[0].path == "a.py");
  CHECK(c.files[1].path == "b.py");
  CHECK_THROWS_AS(make_corpus("org", {make_source_file("a.py", "x"),
                                      make_source_file("a.py", "y")}),
                  Error);
  CHECK_THROWS_AS(make_corpus("", {}), Error);
}

TEST_CASE("ingest walks recursively, filters by suffix, skips bad files") {
  TmpDir tmp("colabmem_test_ingest");
  tmp.write("pkg/a.py", "x = 1\n");
  tmp.write("pkg/sub/b.py", "y = 2\n");
  tmp.write("notes.txt", "not python\n");
  tmp.write("bad.py", "s = \"\xC3\x28\"\n");

  auto [corpus, skipped] = ingest(tmp.path, "org");
  std::vector<std::string> paths;
  for (const auto& f : corpus.files) paths.push_back(f.path);
  CHECK(paths == std::vector<std::string>{"pkg/a.py", "pkg/sub/b.py"});
  REQUIRE(skipped.size() == 1);
  CHECK(skipped[0].path == "bad.py");
  CHECK(skipped[0].reason == "invalid_utf8");

  CHECK_THROWS_AS(ingest(tmp.path / "missing", "org"), Error);
}

TEST_CASE("filter drops low-alnum and generated-marker files") {
  std::string junk;
  for (int i = 0; i < 20; ++i) junk += "### $$$ !!!\n";
  std::string marked = "#!/usr/bin/env python\n# Auto-GENERATED, do not edit\nx = 1\n";
  std::string late_marker = "a = 1\nb = 2\nc = 3\nd = 4\ne = 5\nf = 6\n# auto-generated\n";

  auto corpus = make_corpus("org", {make_source_file("gen.py", marked),
                                    make_source_file("junk.py", junk),
                                    make_source_file("late.py", late_marker),
                                    make_source_file("ok.py", "x = 1\n")});
  auto [kept, dropped] = filter_files(corpus);

  std::vector<std::string> kept_paths;
  for (const auto& f : kept.files) kept_paths.push_back(f.path);
  // the marker only counts within the first five lines
  CHECK(kept_paths == std::vector<std::string>{"late.py", "ok.py"});

  std::set<std::pair<std::string, std::string>> reasons;
  for (const auto& s : dropped) reasons.insert({s.path, s.reason});
  CHECK(reasons.count({"gen.py", "auto_generated"}) == 1);
  CHECK(reasons.count({"junk.py", "alnum_fraction"}) == 1);
}

TEST_CASE("split takes ceil(fraction*N) for train and keeps both sides sorted") {
  std::vector<SourceFile> files;
  for (int i = 0; i < 10; ++i) {
    files.push_back(make_source_file("f" + std::to_string(i) + ".py",
                                     "x = " + std::to_string(i) + "\n"));
  }
  auto corpus = make_corpus("org", std::move(files));

  auto [train, val] = split_corpus(corpus, 0.85, 7);
  CHECK(train.files.size() == 9);  // ceil(8.5)
  CHECK(val.files.size() == 1);
  CHECK(train.split == Split::kTrain);
  CHECK(val.split == Split::kValidation);
  CHECK(std::is_sorted(train.files.begin(), train.files.end(),
                       [](const SourceFile& a, const SourceFile& b) {
                         return a.path < b.path;
                       }));

  // the two sides partition the corpus
  std::set<std::string> all;
  for (const auto& f : train.files) all.insert(f.path);
  for (const auto& f : val.files) all.insert(f.path);
  CHECK(all.size() == 10);

  // same seed, same split; different seed, eventually different
  auto [train2, val2] = split_corpus(corpus, 0.85, 7);
  CHECK(val2.files[0].path == val.files[0].path);
  bool moved = false;
  for (std::uint64_t s = 0; s < 20 && !moved; ++s) {
    auto [t3, v3] = split_corpus(corpus, 0.85, s);
    moved = v3.files[0].path != val.files[0].path;
  }
  CHECK(moved);
}

TEST_CASE("split always leaves at least one validation file") {
  std::vector<SourceFile> files;
  for (int i = 0; i < 4; ++i) {
    files.push_back(
        make_source_file("f" + std::to_string(i) + ".py", "pass\n"));
  }
  auto corpus = make_corpus("org", std::move(files));
  auto [train, val] = split_corpus(corpus, 0.99, 1);
  CHECK(train.files.size() == 3);
  CHECK(val.files.size() == 1);

  CHECK_THROWS_AS(split_corpus(make_corpus("o", {make_source_file("a.py", "x")}),
                               0.9, 1),
                  Error);
  CHECK_THROWS_AS(split_corpus(corpus, 0.0, 1), Error);
  CHECK_THROWS_AS(split_corpus(corpus, 1.0, 1), Error);
}
