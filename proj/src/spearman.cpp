#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "mtpop/error.hpp"
#include "mtpop/eval.hpp"
#include "mtpop/random.hpp"

namespace mtpop {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j - 1) + 1.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

std::optional<double> spearman(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) {
    throw ConfigError(fmt::format("spearman: {} predictions for {} actual values",
                                  predicted.size(), actual.size()));
  }
  const std::size_t k = predicted.size();
  if (k < 2) throw ConfigError("spearman needs at least two samples");
  for (std::size_t i = 0; i < k; ++i) {
    if (!std::isfinite(predicted[i]) || !std::isfinite(actual[i])) {
      throw NumericError(fmt::format("spearman: non-finite value at position {}", i));
    }
  }
  const auto p = average_ranks(actual);
  const auto q = average_ranks(predicted);
  const double n = static_cast<double>(k);
  // Both rank vectors share the mean (k + 1) / 2.
  const double mean = 0.5 * (n + 1.0);
  double spp = 0, sqq = 0, spq = 0;
  for (std::size_t i = 0; i < k; ++i) {
    spp += (p[i] - mean) * (p[i] - mean);
    sqq += (q[i] - mean) * (q[i] - mean);
    spq += (p[i] - mean) * (q[i] - mean);
  }
  if (spp <= 0.0 || sqq <= 0.0) return std::nullopt;
  const double sd_p = std::sqrt(spp / (n - 1.0));
  const double sd_q = std::sqrt(sqq / (n - 1.0));
  const double rs = spq / ((n - 1.0) * sd_p * sd_q);
  return std::clamp(rs, -1.0, 1.0);
}

std::vector<std::size_t> kfold_split(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 1) throw ConfigError("kfold_split: need at least one fold");
  if (n < folds) {
    throw ConfigError(fmt::format("kfold_split: {} items cannot fill {} folds", n, folds));
  }
  Rng rng(seed);
  const auto order = random_permutation(n, rng);
  std::vector<std::size_t> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[order[i]] = i % folds;
  return fold;
}

std::vector<std::size_t> kfold_split_grouped(const std::vector<std::size_t>& group_of,
                                             std::size_t folds, std::uint64_t seed) {
  const std::size_t n = group_of.size();
  if (folds < 1) throw ConfigError("kfold_split: need at least one fold");
  if (n < folds) {
    throw ConfigError(fmt::format("kfold_split: {} items cannot fill {} folds", n, folds));
  }
  Rng rng(seed);
  const auto order = random_permutation(n, rng);
  std::vector<std::size_t> sorted(order);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [&](std::size_t a, std::size_t b) { return group_of[a] < group_of[b]; });
  std::vector<std::size_t> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[sorted[i]] = i % folds;
  return fold;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ConfigError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace mtpop
