#include "colabmem/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace colabmem {
namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// Left-aligns the first column, right-aligns the rest.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header)
      : header_(std::move(header)) {}

  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  std::string render() const {
    std::vector<std::size_t> width(header_.size());
    auto widen = [&width](const std::vector<std::string>& row) {
      for (std::size_t i = 0; i < row.size(); ++i)
        width[i] = std::max(width[i], row[i].size());
    };
    widen(header_);
    for (const auto& row : rows_) widen(row);

    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& row) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i > 0) out << "  ";
        long pad = static_cast<long>(width[i]) - static_cast<long>(row[i].size());
        if (i == 0) {
          out << row[i] << std::string(pad, ' ');
        } else {
          out << std::string(pad, ' ') << row[i];
        }
      }
      out << '\n';
    };
    emit(header_);
    std::size_t total = 0;
    for (std::size_t i = 0; i < width.size(); ++i)
      total += width[i] + (i > 0 ? 2 : 0);
    out << std::string(total, '-') << '\n';
    for (const auto& row : rows_) emit(row);
    return out.str();
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string section(const std::string& title) {
  return "== " + title + " ==\n";
}

}  // namespace

std::string render_report(const ReportInput& input) {
  std::ostringstream out;

  out << section("Corpus statistics (train split)");
  {
    TextTable t({"Org", "Files", "Bytes", "LoC", "Classes", "Funcs", "Docs",
                 "CloneBlk", "CloneLoC", "LoC/MB", "Funcs/MB", "Docs/MB",
                 "CloneLoC/MB"});
    for (const auto& row : input.stats) {
      t.add({row.org_id, std::to_string(row.files), std::to_string(row.bytes),
             std::to_string(row.loc), std::to_string(row.classes),
             std::to_string(row.functions), std::to_string(row.docstrings),
             std::to_string(row.clone_blocks), std::to_string(row.clone_loc),
             fmt("%.1f", row.per_mb.loc_per_mb),
             fmt("%.1f", row.per_mb.funcs_per_mb),
             fmt("%.1f", row.per_mb.docs_per_mb),
             fmt("%.1f", row.per_mb.clone_loc_per_mb)});
    }
    out << t.render() << '\n';
  }

  out << section("Validation perplexity");
  {
    std::vector<std::string> header{"Model"};
    for (const auto& org : input.org_order) header.push_back(org);
    header.push_back("Pooled");
    TextTable t(header);
    for (const auto& row : input.effectiveness) {
      std::vector<std::string> cells{row.model};
      for (const auto& org : input.org_order) {
        auto it = std::find_if(row.org_ppl.begin(), row.org_ppl.end(),
                               [&org](const auto& p) { return p.first == org; });
        cells.push_back(it == row.org_ppl.end() ? "-" : fmt("%.3f", it->second));
      }
      cells.push_back(fmt("%.3f", row.pooled_ppl));
      t.add(std::move(cells));
    }
    out << t.render() << '\n';
  }

  if (!input.pass_at_k.empty()) {
    out << section("Functional correctness (mean pass@k)");
    std::vector<std::string> header{"Model"};
    for (const auto& [k, _] : input.pass_at_k.front().mean_at_k)
      header.push_back("pass@" + std::to_string(k));
    TextTable t(header);
    for (const auto& row : input.pass_at_k) {
      std::vector<std::string> cells{row.model};
      for (const auto& [_, v] : row.mean_at_k) cells.push_back(fmt("%.4f", v));
      t.add(std::move(cells));
    }
    out << t.render() << '\n';
  }

  out << section("Memorization: lines cloned from each training corpus");
  {
    std::vector<std::string> header{"Model"};
    for (const auto& org : input.org_order) header.push_back(org);
    header.push_back("Sum");
    TextTable t(header);
    for (const auto& rep : input.memorization) {
      std::vector<std::string> cells{rep.model_name};
      std::size_t sum_lines = 0;
      double sum_ratio = 0.0;
      for (const auto& org : input.org_order) {
        auto it = std::find_if(rep.rows.begin(), rep.rows.end(),
                               [&org](const MemorizationRow& r) {
                                 return r.org_id == org;
                               });
        if (it == rep.rows.end()) {
          cells.push_back("-");
          continue;
        }
        sum_lines += it->mem_lines;
        sum_ratio += it->mem_ratio;
        cells.push_back(std::to_string(it->mem_lines) + " (" +
                        format_ratio_percent(it->mem_ratio) + ")");
      }
      cells.push_back(std::to_string(sum_lines) + " (" +
                      format_ratio_percent(sum_ratio) + ")");
      t.add(std::move(cells));
    }
    out << t.render() << '\n';
  }

  if (!input.cross_org.empty()) {
    out << section("Cross-org clone completion");
    TextTable t({"Model", "LinesGen", "MemBlocks", "MemLines", "Ratio"});
    for (const auto& row : input.cross_org) {
      t.add({row.model, std::to_string(row.result.lines_of_gen),
             std::to_string(row.result.mem_blocks),
             std::to_string(row.result.mem_lines),
             format_ratio_percent(row.result.ratio)});
    }
    out << t.render() << '\n';
  }

  return out.str();
}

}  // namespace colabmem
