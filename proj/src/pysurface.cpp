#include "colabmem/pysurface.hpp"

#include <algorithm>
#include <cmath>

#include "colabmem/common.hpp"

namespace colabmem {

namespace {

struct RawLine {
  std::string_view text;   // without the trailing newline
  std::size_t begin = 0;   // byte offset of the line start
  std::size_t end = 0;     // byte offset one past the line (incl. newline)
};

std::vector<RawLine> split_raw_lines(std::string_view text) {
  std::vector<RawLine> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    RawLine l;
    l.begin = pos;
    if (nl == std::string_view::npos) {
      l.text = text.substr(pos);
      l.end = text.size();
      lines.push_back(l);
      break;
    }
    l.text = text.substr(pos, nl - pos);
    l.end = nl + 1;
    lines.push_back(l);
    pos = nl + 1;
  }
  return lines;
}

bool is_blank(std::string_view line) {
  for (char c : line) {
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

int indent_of(std::string_view line) {
  int col = 0;
  for (char c : line) {
    if (c == ' ') {
      ++col;
    } else if (c == '\t') {
      col = (col / 8 + 1) * 8;
    } else {
      break;
    }
  }
  return col;
}

std::string_view lstrip(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  return line.substr(i);
}

bool starts_def(std::string_view stripped) {
  if (stripped.rfind("async ", 0) == 0) stripped = lstrip(stripped.substr(6));
  return stripped.rfind("def ", 0) == 0 || stripped.rfind("def(", 0) == 0;
}

bool starts_class(std::string_view stripped) {
  return stripped.rfind("class ", 0) == 0 || stripped.rfind("class(", 0) == 0;
}

// Position of the docstring opener on a stripped line, if the line begins a
// string literal (optional r/b/u/f prefixes allowed).
struct StringOpen {
  bool found = false;
  std::string delim;  // `"""`, `'''`, `"` or `'`
};

StringOpen detect_string_open(std::string_view stripped) {
  std::size_t i = 0;
  while (i < stripped.size() && i < 3) {
    char c = stripped[i];
    if (c == 'r' || c == 'b' || c == 'u' || c == 'f' || c == 'R' || c == 'B' ||
        c == 'U' || c == 'F') {
      ++i;
    } else {
      break;
    }
  }
  StringOpen open;
  if (i >= stripped.size()) return open;
  char q = stripped[i];
  if (q != '"' && q != '\'') return open;
  std::string triple(3, q);
  if (stripped.substr(i).rfind(triple, 0) == 0) {
    open.found = true;
    open.delim = triple;
  } else {
    open.found = true;
    open.delim = std::string(1, q);
  }
  return open;
}

}  // namespace

namespace {

// Line index and in-line offset of the colon that terminates a signature
// starting at line `i`: the first ':' at bracket depth 0 outside strings.
struct SigColon {
  bool found = false;
  int line = 0;
  std::size_t col = 0;
};

SigColon find_signature_colon(const std::vector<RawLine>& lines, int i) {
  SigColon out;
  int depth = 0;
  char quote = 0;
  for (int j = i; j < static_cast<int>(lines.size()); ++j) {
    std::string_view t = lines[j].text;
    for (std::size_t k = 0; k < t.size(); ++k) {
      char c = t[k];
      if (quote) {
        if (c == '\\') {
          ++k;
        } else if (c == quote) {
          quote = 0;
        }
        continue;
      }
      if (c == '"' || c == '\'') {
        quote = c;
      } else if (c == '(' || c == '[' || c == '{') {
        ++depth;
      } else if (c == ')' || c == ']' || c == '}') {
        --depth;
      } else if (c == '#') {
        break;
      } else if (c == ':' && depth == 0) {
        out.found = true;
        out.line = j;
        out.col = k;
        return out;
      }
    }
    if (quote) quote = 0;  // single-quoted strings do not span lines
    if (j - i > 50) break;  // runaway; treat as malformed
  }
  return out;
}

}  // namespace

std::vector<FunctionRecord> extract_functions(const SourceFile& file) {
  std::vector<FunctionRecord> records;
  const auto lines = split_raw_lines(file.text);
  const int n = static_cast<int>(lines.size());

  for (int i = 0; i < n; ++i) {
    std::string_view stripped = lstrip(lines[i].text);
    if (!starts_def(stripped)) continue;
    const int def_indent = indent_of(lines[i].text);

    SigColon colon = find_signature_colon(lines, i);
    if (!colon.found) continue;
    const int sig_end = colon.line;
    const std::size_t lead = lines[i].text.size() - stripped.size();
    std::string sig;
    for (int j = i; j <= sig_end; ++j) {
      if (j > i) sig += '\n';
      std::string_view t = lines[j].text;
      if (j == sig_end) t = t.substr(0, colon.col + 1);
      if (j == i) t = t.substr(lead);  // signature starts at the def keyword
      sig += std::string(t);
    }
    bool body_on_sig_line =
        !is_blank(lines[sig_end].text.substr(colon.col + 1));

    // Body extent: subsequent lines with strictly greater indentation.
    int body_begin = sig_end + 1;
    int body_end = body_begin;
    for (int j = body_begin; j < n; ++j) {
      if (is_blank(lines[j].text)) continue;
      if (indent_of(lines[j].text) <= def_indent) break;
      body_end = j + 1;
    }

    FunctionRecord rec;
    rec.signature = std::move(sig);
    rec.path = file.path;
    rec.start_line = i + 1;

    // Docstring: string literal as the first statement of the body. A body
    // that starts on the signature line leaves no room for one.
    int after_doc = body_begin;
    if (!body_on_sig_line) {
      int first_stmt = body_begin;
      while (first_stmt < body_end && is_blank(lines[first_stmt].text)) {
        ++first_stmt;
      }
      if (first_stmt < body_end) {
        std::string_view fs = lstrip(lines[first_stmt].text);
        StringOpen open = detect_string_open(fs);
        bool terminated = open.found;
        int doc_end = first_stmt;
        if (open.found && open.delim.size() == 3) {
          std::size_t at = fs.find(open.delim);
          std::string_view rest = fs.substr(at + 3);
          if (rest.find(open.delim) == std::string_view::npos) {
            ++doc_end;
            while (doc_end < body_end &&
                   std::string_view(lines[doc_end].text).find(open.delim) ==
                       std::string_view::npos) {
              ++doc_end;
            }
            terminated = doc_end < body_end;
          }
        }
        if (open.found && terminated) {
          std::string doc;
          for (int j = first_stmt; j <= doc_end; ++j) {
            if (j > first_stmt) doc += '\n';
            doc += std::string(lines[j].text);
          }
          rec.docstring = std::move(doc);
          after_doc = doc_end + 1;
        }
      }
    }

    std::string body;
    if (body_on_sig_line) {
      std::string_view rest = lines[sig_end].text.substr(colon.col + 1);
      body += std::string(rest);
      body += '\n';
    }
    for (int j = after_doc; j < body_end; ++j) {
      body.append(file.text, lines[j].begin, lines[j].end - lines[j].begin);
    }
    rec.body = std::move(body);
    records.push_back(std::move(rec));
  }
  return records;
}

SurfaceCounts count_surface(const SourceFile& file) {
  SurfaceCounts counts;
  for (const auto& line : split_raw_lines(file.text)) {
    if (starts_class(lstrip(line.text))) ++counts.classes;
  }
  auto records = extract_functions(file);
  counts.functions = static_cast<int>(records.size());
  for (const auto& r : records) {
    if (r.docstring.has_value()) ++counts.docstrings;
  }
  return counts;
}

SurfaceCounts count_surface(const OrgCorpus& corpus) {
  SurfaceCounts total;
  for (const auto& f : corpus.files) {
    SurfaceCounts c = count_surface(f);
    total.classes += c.classes;
    total.functions += c.functions;
    total.docstrings += c.docstrings;
  }
  return total;
}

namespace {

// Source slice from the def line through the docstring's closing line,
// including that line's newline when the file has one.
std::string prompt_text_for(const SourceFile& file, const FunctionRecord& rec) {
  std::string text = rec.signature;
  text += '\n';
  text += *rec.docstring;
  // Re-attach the newline that follows the docstring in the source.
  std::size_t at = file.text.find(text);
  if (at != std::string::npos && at + text.size() < file.text.size() &&
      file.text[at + text.size()] == '\n') {
    text += '\n';
  }
  return text;
}

}  // namespace

std::vector<Prompt> build_function_prompts(const OrgCorpus& corpus,
                                           int prompt_cap) {
  std::vector<Prompt> prompts;
  for (const auto& f : corpus.files) {
    for (const auto& rec : extract_functions(f)) {
      if (!rec.docstring.has_value()) continue;
      std::string text = prompt_text_for(f, rec);
      if (static_cast<int>(text.size()) > prompt_cap) continue;
      Prompt p;
      p.id = "fn:" + corpus.org_id + ":" + rec.path + ":" +
             std::to_string(rec.start_line);
      p.kind = PromptKind::kFunction;
      p.token_len = static_cast<int>(text.size());
      p.text = std::move(text);
      p.origin_org = corpus.org_id;
      prompts.push_back(std::move(p));
    }
  }
  return prompts;
}

std::size_t sample_size(std::size_t n, double fraction) {
  return static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(n) + 0.5));
}

std::vector<Prompt> sample_prompts(const std::vector<Prompt>& prompts,
                                   double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error("config", "sample fraction must lie in (0, 1]");
  }
  std::size_t target = sample_size(prompts.size(), fraction);
  std::vector<std::size_t> idx(prompts.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(derive_seed(seed, {"prompt-sample"}));
  rng.shuffle(idx);
  idx.resize(target);
  std::sort(idx.begin(), idx.end());
  std::vector<Prompt> out;
  out.reserve(target);
  for (std::size_t i : idx) out.push_back(prompts[i]);
  return out;
}

std::vector<Prompt> build_clone_prefix_prompts(
    const std::vector<CloneBlock>& blocks, int prompt_cap) {
  std::vector<Prompt> prompts;
  auto join = [](const std::vector<std::string>& lines, std::size_t begin,
                 std::size_t end) {
    std::string s;
    for (std::size_t i = begin; i < end; ++i) {
      s += lines[i];
      s += '\n';
    }
    return s;
  };
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& blk = blocks[b];
    const std::size_t n = blk.normalized_lines.size();
    if (n < 2) continue;
    // Smallest portion count whose every prefix fits the cap. Portions keep
    // at least 2 lines so each one has a nonempty suffix.
    std::size_t chosen_parts = 0;
    for (std::size_t parts = 1; parts <= n / 2; ++parts) {
      bool fits = true;
      for (std::size_t p = 0; p < parts && fits; ++p) {
        std::size_t begin = n * p / parts;
        std::size_t end = n * (p + 1) / parts;
        std::size_t mid = begin + (end - begin + 1) / 2;
        if (join(blk.normalized_lines, begin, mid).size() >
            static_cast<std::size_t>(prompt_cap)) {
          fits = false;
        }
      }
      if (fits) {
        chosen_parts = parts;
        break;
      }
    }
    if (chosen_parts == 0) continue;  // a single line exceeds the cap
    std::string org;
    {
      std::vector<std::string> ids;
      for (const auto& occ : blk.occurrences) ids.push_back(occ.source_id);
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) org += '+';
        org += ids[i];
      }
    }
    for (std::size_t p = 0; p < chosen_parts; ++p) {
      std::size_t begin = n * p / chosen_parts;
      std::size_t end = n * (p + 1) / chosen_parts;
      std::size_t mid = begin + (end - begin + 1) / 2;
      Prompt prompt;
      prompt.id = "clone:" + std::to_string(b) + ":" + std::to_string(p);
      prompt.kind = PromptKind::kClonePrefix;
      prompt.text = join(blk.normalized_lines, begin, mid);
      prompt.token_len = static_cast<int>(prompt.text.size());
      prompt.expected_suffix = join(blk.normalized_lines, mid, end);
      prompt.origin_org = org;
      prompts.push_back(std::move(prompt));
    }
  }
  return prompts;
}

}  // namespace colabmem
