#include <algorithm>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "mtpop/eval.hpp"

namespace mtpop {

void write_report_table(const std::vector<EvalReport>& reports, std::ostream& out,
                        bool include_runtime) {
  std::vector<std::vector<std::string>> rows{
      {"method", "variant", "median_rs", "folds", "skipped", "digest"}};
  if (include_runtime) rows.front().push_back("runtime_s");
  for (const auto& r : reports) {
    rows.push_back({r.method, r.variant.empty() ? "-" : r.variant, fmt::format("{:.4f}", r.median_rs),
                    fmt::format("{}", r.per_fold.size()), fmt::format("{}", r.skipped_folds.size()),
                    r.config_digest});
    if (include_runtime) rows.back().push_back(fmt::format("{:.2f}", r.runtime_seconds));
  }
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line += "  ";
      line += fmt::format("{:<{}}", row[c], width[c]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
}

void write_report_jsonl(const std::vector<EvalReport>& reports, std::ostream& out,
                        bool include_runtime) {
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["variant"] = r.variant;
    j["median_rs"] = r.median_rs;
    j["per_fold"] = r.per_fold;
    j["skipped_folds"] = r.skipped_folds;
    j["config_digest"] = r.config_digest;
    if (include_runtime) j["runtime_seconds"] = r.runtime_seconds;
    out << j.dump() << '\n';
  }
}

void sort_by_median(std::vector<EvalReport>& reports) {
  std::stable_sort(reports.begin(), reports.end(),
                   [](const EvalReport& a, const EvalReport& b) { return a.median_rs > b.median_rs; });
}

}  // namespace mtpop
