#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "mtpop/error.hpp"
#include "mtpop/random.hpp"
#include "mtpop/rearrange.hpp"

namespace mtpop {

namespace {

double squared_distance(const FeatureVector& a, const FeatureVector& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i] - b[i];
    d += x * x;
  }
  return d;
}

// Nearest centroid per point, ties to the lowest cluster id. Returns true
// when any assignment changed.
bool assign(const std::vector<FeatureVector>& points, const std::vector<FeatureVector>& centroids,
            std::vector<std::size_t>& assignment) {
  bool changed = false;
  for (std::size_t p = 0; p < points.size(); ++p) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      const double d = squared_distance(points[p], centroids[c]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    if (assignment[p] != best) {
      assignment[p] = best;
      changed = true;
    }
  }
  return changed;
}

}  // namespace

double wcss(const std::vector<FeatureVector>& points, const std::vector<std::size_t>& assignment,
            const std::vector<FeatureVector>& centroids) {
  double total = 0;
  for (std::size_t p = 0; p < points.size(); ++p) {
    total += squared_distance(points[p], centroids[assignment[p]]);
  }
  return total;
}

KMeansResult kmeans(const std::vector<FeatureVector>& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter) {
  const std::size_t n = points.size();
  if (n == 0) throw ConfigError("kmeans: no points");
  if (k < 1 || k > n) throw ConfigError(fmt::format("kmeans: k={} must lie in [1, {}]", k, n));
  const std::size_t dim = points.front().size();
  for (std::size_t p = 0; p < n; ++p) {
    if (points[p].size() != dim) {
      throw ConfigError(fmt::format("kmeans: point {} has {} components, expected {}", p,
                                    points[p].size(), dim));
    }
  }

  // Farthest-point seeding.
  Rng rng(seed);
  std::vector<FeatureVector> centroids;
  std::vector<bool> chosen(n, false);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t next = uniform_index(rng, n);
  for (std::size_t c = 0; c < k; ++c) {
    chosen[next] = true;
    centroids.push_back(points[next]);
    std::size_t far = n;
    double far_d = -1;
    for (std::size_t p = 0; p < n; ++p) {
      nearest[p] = std::min(nearest[p], squared_distance(points[p], centroids.back()));
      if (!chosen[p] && nearest[p] > far_d) {
        far_d = nearest[p];
        far = p;
      }
    }
    next = far;
  }

  KMeansResult result;
  result.assignment.assign(n, k);  // sentinel so the first pass counts as a change
  assign(points, centroids, result.assignment);
  result.wcss_history.push_back(wcss(points, result.assignment, centroids));

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    std::vector<FeatureVector> sums(k, FeatureVector(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t p = 0; p < n; ++p) {
      auto& s = sums[result.assignment[p]];
      for (std::size_t d = 0; d < dim; ++d) s[d] += points[p][d];
      ++counts[result.assignment[p]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d) centroids[c][d] = sums[c][d] / double(counts[c]);
    }
    // Empty clusters take the point farthest from its own centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      double far_d = -1;
      for (std::size_t p = 0; p < n; ++p) {
        if (counts[result.assignment[p]] < 2) continue;
        const double d = squared_distance(points[p], centroids[result.assignment[p]]);
        if (d > far_d) {
          far_d = d;
          far = p;
        }
      }
      if (far == n) break;
      --counts[result.assignment[far]];
      result.assignment[far] = c;
      counts[c] = 1;
      centroids[c] = points[far];
    }
    const bool changed = assign(points, centroids, result.assignment);
    result.wcss_history.push_back(wcss(points, result.assignment, centroids));
    result.iterations = iter + 1;
    if (!changed) break;
  }
  result.centroids = std::move(centroids);
  return result;
}

std::vector<FeatureVector> standardize(const std::vector<FeatureVector>& points) {
  if (points.empty()) return {};
  const std::size_t dim = points.front().size();
  const double n = static_cast<double>(points.size());
  std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
  for (const auto& p : points) {
    for (std::size_t d = 0; d < dim; ++d) mean[d] += p[d] / n;
  }
  for (const auto& p : points) {
    for (std::size_t d = 0; d < dim; ++d) sd[d] += (p[d] - mean[d]) * (p[d] - mean[d]) / n;
  }
  for (auto& s : sd) s = std::sqrt(s);
  std::vector<FeatureVector> out(points.size(), FeatureVector(dim, 0.0));
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t d = 0; d < dim; ++d) {
      out[i][d] = sd[d] > 0.0 ? (points[i][d] - mean[d]) / sd[d] : 0.0;
    }
  }
  return out;
}

}  // namespace mtpop
