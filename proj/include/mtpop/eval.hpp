#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtpop/baselines.hpp"
#include "mtpop/multiscale.hpp"
#include "mtpop/popularity.hpp"
#include "mtpop/solver.hpp"

namespace mtpop {

/// Ranks starting at 1; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rank correlation: the normalised product-moment of the two
/// rank vectors. nullopt when either vector is constant.
std::optional<double> spearman(std::span<const double> predicted, std::span<const double> actual);

/// Fold id per index. Sizes differ by at most one.
std::vector<std::size_t> kfold_split(std::size_t n, std::size_t folds, std::uint64_t seed);
/// As kfold_split, but the records of each group are spread evenly over folds.
std::vector<std::size_t> kfold_split_grouped(const std::vector<std::size_t>& group_of,
                                             std::size_t folds, std::uint64_t seed);

double median(std::vector<double> values);

/// Everything a method sees for one train/test split.
struct FoldData {
  const Dataset& dataset;
  const TensorIndex& index;
  std::span<const std::size_t> train;
  std::span<const std::size_t> test;
  std::uint64_t seed = 0;
};

class Method {
 public:
  virtual ~Method() = default;
  virtual std::string name() const = 0;
  /// Stable text of the hyper-parameters, hashed into report digests.
  virtual std::string describe() const = 0;
  /// One prediction per test record, in order.
  virtual std::vector<double> predict(const FoldData& fold) const = 0;
};

/// The plain rule over-shrinks popularity-sized residuals to zero; the
/// pipeline defaults to a tenth of it.
inline SolverConfig mt_solver_defaults() {
  SolverConfig s;
  s.lambda_mode = LambdaMode::scaled;
  s.lambda_scale = 0.1;
  return s;
}

struct MtConfig {
  ScalePlan plan;  // empty: general time scales for the dataset bin width
  SolverConfig solver = mt_solver_defaults();
  bool rearrange = true;
  std::size_t k_user = 0;  // 0: ceil(sqrt(users))
  std::size_t k_post = 0;  // 0: ceil(sqrt(posts))
  BlockRounding rounding = BlockRounding::base2;
  /// Fit on observed values minus their mean and add the mean back.
  bool center = true;
};

/// Output of the full multi-scale pipeline, in the caller's axis order.
struct MtPipelineResult {
  PTensor completed;
  Rearrangement arrangement;
  std::vector<CULayout> layouts;  // planned on the rearranged tensor
  SolverState state;
};

/// Rearranges by context, plans one layout per scale, runs the solver and
/// maps the completion back to the original user/post order.
MtPipelineResult mt_complete(const PTensor& observed, const ContextFeatures& features,
                             const MtConfig& cfg, double bin_width_days, std::uint64_t seed);

struct MethodConfig {
  MtConfig mt;
  AvConfig av;
  double lr_ridge = 1e-6;
  BgConfig bg;
  TmfConfig tmf;
};

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"mt", "av", "lr", "bg", "tmf"};
  return names;
}

/// Throws ConfigError listing the valid names for an unknown method.
std::unique_ptr<Method> make_method(const std::string& name, const MethodConfig& cfg);

struct ExperimentConfig {
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  bool stratify_by_user = false;
};

struct EvalReport {
  std::string method;
  std::string variant;  // scale-plan label for ablations, empty otherwise
  std::vector<double> per_fold;
  std::vector<std::size_t> skipped_folds;
  double median_rs = 0.0;
  std::string config_digest;
  double runtime_seconds = 0.0;
};

/// Held-out Spearman of one split; nullopt when the actuals are constant.
std::optional<double> evaluate_split(const Method& method, const FoldData& fold);

EvalReport run_experiment(const Dataset& ds, const Method& method, const ExperimentConfig& cfg);

struct AblationVariant {
  std::string label;
  ScalePlan plan;
};

/// GT, GT without each of its scales, GT plus each day-specific scale
/// (2, 3, 5 days) and each month-specific scale (4, 5, 6 months).
std::vector<AblationVariant> ablation_variants(const ScalePlan& general, double bin_width_days);

std::vector<EvalReport> run_ablation(const Dataset& ds, const MethodConfig& cfg,
                                     const ExperimentConfig& exp);

/// 64-bit FNV-1a, hex encoded.
std::string digest(const std::string& text);

/// Aligned text table, one row per report, in the given order.
void write_report_table(const std::vector<EvalReport>& reports, std::ostream& out,
                        bool include_runtime = false);
/// One JSON object per line.
void write_report_jsonl(const std::vector<EvalReport>& reports, std::ostream& out,
                        bool include_runtime = false);
/// Stable sort by median_rs, best first.
void sort_by_median(std::vector<EvalReport>& reports);

}  // namespace mtpop
