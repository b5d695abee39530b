#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "mtpop/tensor.hpp"

namespace mtpop {

using FeatureVector = std::vector<double>;

/// Precomputed context for every tensor user and post index.
struct ContextFeatures {
  std::map<std::size_t, FeatureVector> user_features;  // user influence
  std::map<std::size_t, FeatureVector> post_features;  // content + metadata, no share time
  std::map<std::size_t, std::int64_t> share_time;      // post index -> epoch seconds
};

struct KMeansResult {
  std::vector<std::size_t> assignment;
  std::vector<FeatureVector> centroids;
  /// Within-cluster sum of squares after seeding and after each Lloyd step.
  std::vector<double> wcss_history;
  std::size_t iterations = 0;
};

/// Lloyd k-means with farthest-point seeding. The first centre is drawn
/// from `seed`; empty clusters are re-seeded from the point farthest from
/// its centroid.
KMeansResult kmeans(const std::vector<FeatureVector>& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter = 100);

double wcss(const std::vector<FeatureVector>& points, const std::vector<std::size_t>& assignment,
            const std::vector<FeatureVector>& centroids);

/// Column-wise z-scores; constant columns become 0.
std::vector<FeatureVector> standardize(const std::vector<FeatureVector>& points);

/// Axis permutations. `user_perm[i]` is the original user placed at
/// position i; likewise for posts.
struct Rearrangement {
  std::vector<std::size_t> user_perm;
  std::vector<std::size_t> post_perm;
  std::vector<std::size_t> user_groups;  // group id per original user index
  std::vector<std::size_t> post_groups;  // group id per original post index

  /// Smallest non-empty group on each axis.
  std::size_t min_user_group() const;
  std::size_t min_post_group() const;

  static Rearrangement identity(std::size_t users, std::size_t posts);
};

/// k-means default: ceil(sqrt(n)).
std::size_t default_cluster_count(std::size_t n);

/// Groups users by influence features, groups posts by content features,
/// and orders posts inside each group by share time. `users`/`posts` give
/// the tensor extents the features must cover.
Rearrangement build_rearrangement(const ContextFeatures& features, std::size_t users,
                                  std::size_t posts, std::size_t k_user, std::size_t k_post,
                                  std::uint64_t seed);

PTensor apply(const Rearrangement& r, const PTensor& tensor);
PTensor invert(const Rearrangement& r, const PTensor& tensor);

/// Position of each original index after the permutation.
std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& perm);
bool is_permutation(const std::vector<std::size_t>& perm);

/// Mean over consecutive windows of `window` entries along `order` of the
/// total per-dimension variance of the features in that window.
double mean_window_variance(const std::map<std::size_t, FeatureVector>& features,
                            const std::vector<std::size_t>& order, std::size_t window);

}  // namespace mtpop
