#include <algorithm>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "mtpop/error.hpp"
#include "mtpop/eval.hpp"

namespace mtpop {

std::optional<double> evaluate_split(const Method& method, const FoldData& fold) {
  std::vector<double> actual;
  actual.reserve(fold.test.size());
  for (auto id : fold.test) actual.push_back(fold.dataset.records[id].popularity());
  const auto predicted = method.predict(fold);
  if (predicted.size() != actual.size()) {
    throw NumericError(fmt::format("method {} returned {} predictions for {} test records",
                                   method.name(), predicted.size(), actual.size()));
  }
  const auto lo = std::minmax_element(actual.begin(), actual.end());
  if (actual.size() < 2 || *lo.first == *lo.second) return std::nullopt;
  // A constant prediction carries no ordering.
  return spearman(predicted, actual).value_or(0.0);
}

EvalReport run_experiment(const Dataset& ds, const Method& method, const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  ds.validate();
  const TensorIndex index = index_dataset(ds);
  const std::size_t n = ds.records.size();
  std::vector<std::size_t> fold_of;
  if (cfg.stratify_by_user) {
    std::vector<std::size_t> users;
    users.reserve(n);
    for (const auto& c : index.cells) users.push_back(c.user);
    fold_of = kfold_split_grouped(users, cfg.folds, cfg.seed);
  } else {
    fold_of = kfold_split(n, cfg.folds, cfg.seed);
  }

  EvalReport report;
  report.method = method.name();
  report.config_digest = digest(fmt::format("{}|folds={}|seed={}|stratify={}", method.describe(),
                                            cfg.folds, cfg.seed, cfg.stratify_by_user));
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? test : train).push_back(i);
    const FoldData fold{ds, index, train, test, cfg.seed + f};
    if (auto rs = evaluate_split(method, fold)) {
      report.per_fold.push_back(*rs);
    } else {
      report.skipped_folds.push_back(f);
    }
  }
  if (report.per_fold.empty()) {
    throw DataError(fmt::format("every fold of {} had constant held-out popularity", method.name()));
  }
  report.median_rs = median(report.per_fold);
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<AblationVariant> ablation_variants(const ScalePlan& general, double bin_width_days) {
  const auto bins = [&](double days) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(days / bin_width_days)));
  };
  std::vector<AblationVariant> out{{"GT", general}};
  for (const auto& s : general.scales) out.push_back({"GT-" + s.name, general.without(s.name)});
  for (int days : {2, 3, 5}) {
    const std::string name = fmt::format("day{}", days);
    out.push_back({"GT+" + name, general.with({name, bins(days)})});
  }
  for (int months : {4, 5, 6}) {
    const std::string name = fmt::format("month{}", months);
    out.push_back({"GT+" + name, general.with({name, bins(30.0 * months)})});
  }
  return out;
}

std::vector<EvalReport> run_ablation(const Dataset& ds, const MethodConfig& cfg,
                                     const ExperimentConfig& exp) {
  const ScalePlan general =
      cfg.mt.plan.scales.empty() ? default_scale_plan(ds.bin_width_days) : cfg.mt.plan;
  std::vector<EvalReport> out;
  for (const auto& variant : ablation_variants(general, ds.bin_width_days)) {
    MethodConfig mc = cfg;
    mc.mt.plan = variant.plan;
    const auto method = make_method("mt", mc);
    EvalReport report = run_experiment(ds, *method, exp);
    report.variant = variant.label;
    out.push_back(std::move(report));
  }
  return out;
}

std::string digest(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace mtpop
