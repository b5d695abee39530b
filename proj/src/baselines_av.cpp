#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "mtpop/baselines.hpp"
#include "mtpop/error.hpp"

namespace mtpop {

double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa <= 0.0 || bb <= 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

double av_predict(const FeatureVector& query, const std::vector<AvCandidate>& train,
                  const AvConfig& cfg) {
  if (query.empty()) throw DataError("average-views query has no post features");
  if (train.empty()) throw DataError("average-views needs at least one training photo");
  if (cfg.neighbours == 0 || cfg.pool_size == 0) {
    throw ConfigError("average-views neighbours and pool size must be positive");
  }

  std::vector<double> sim(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].features.size() != query.size()) {
      throw DataError(fmt::format("training photo {} has {} features, query has {}", i,
                                  train[i].features.size(), query.size()));
    }
    sim[i] = cosine_similarity(query, train[i].features);
  }
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });

  const double cutoff = sim[order[std::min(cfg.pool_size, order.size()) - 1]];
  std::vector<std::size_t> pool;
  for (auto i : order) {
    if (sim[i] < cutoff) break;
    pool.push_back(i);
  }
  if (pool.size() > cfg.neighbours) {
    // Most recent first; the similarity order breaks equal timestamps.
    std::stable_sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
      return train[a].share_time > train[b].share_time;
    });
    pool.resize(cfg.neighbours);
  }
  double sum = 0;
  for (auto i : pool) sum += train[i].popularity;
  return sum / static_cast<double>(pool.size());
}

}  // namespace mtpop
