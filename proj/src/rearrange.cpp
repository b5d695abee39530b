#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "mtpop/error.hpp"
#include "mtpop/rearrange.hpp"

namespace mtpop {

namespace {

std::vector<FeatureVector> collect(const std::map<std::size_t, FeatureVector>& features,
                                   std::size_t count, const char* axis) {
  std::vector<FeatureVector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto it = features.find(i);
    if (it == features.end()) {
      throw DataError(fmt::format("missing {} feature vector for index {}", axis, i));
    }
    if (!out.empty() && it->second.size() != out.front().size()) {
      throw DataError(fmt::format("{} feature vector for index {} has {} components, expected {}",
                                  axis, i, it->second.size(), out.front().size()));
    }
    for (double x : it->second) {
      if (!std::isfinite(x)) {
        throw DataError(fmt::format("{} feature vector for index {} is not finite", axis, i));
      }
    }
    out.push_back(it->second);
  }
  return out;
}

double norm(const FeatureVector& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Group ids re-labelled so that groups are numbered by ascending centroid
// norm (ties by original id).
std::vector<std::size_t> ordered_groups(const KMeansResult& km) {
  std::vector<std::size_t> order(km.centroids.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return norm(km.centroids[a]) < norm(km.centroids[b]);
  });
  std::vector<std::size_t> rank(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
  std::vector<std::size_t> groups(km.assignment.size());
  for (std::size_t p = 0; p < groups.size(); ++p) groups[p] = rank[km.assignment[p]];
  return groups;
}

std::size_t smallest_group(const std::vector<std::size_t>& groups) {
  std::map<std::size_t, std::size_t> sizes;
  for (auto g : groups) ++sizes[g];
  std::size_t best = groups.size();
  for (const auto& [g, n] : sizes) best = std::min(best, n);
  return std::max<std::size_t>(best, 1);
}

void check_perm(const std::vector<std::size_t>& perm, std::size_t n, const char* axis) {
  if (perm.size() != n) {
    throw ConfigError(fmt::format("{} permutation has length {}, tensor axis has {}", axis,
                                  perm.size(), n));
  }
}

}  // namespace

std::size_t Rearrangement::min_user_group() const { return smallest_group(user_groups); }
std::size_t Rearrangement::min_post_group() const { return smallest_group(post_groups); }

Rearrangement Rearrangement::identity(std::size_t users, std::size_t posts) {
  Rearrangement r;
  r.user_perm.resize(users);
  r.post_perm.resize(posts);
  std::iota(r.user_perm.begin(), r.user_perm.end(), 0);
  std::iota(r.post_perm.begin(), r.post_perm.end(), 0);
  r.user_groups.assign(users, 0);
  r.post_groups.assign(posts, 0);
  return r;
}

std::size_t default_cluster_count(std::size_t n) {
  if (n == 0) return 0;
  auto k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  return std::min(k, n);
}

Rearrangement build_rearrangement(const ContextFeatures& features, std::size_t users,
                                  std::size_t posts, std::size_t k_user, std::size_t k_post,
                                  std::uint64_t seed) {
  const auto user_points = standardize(collect(features.user_features, users, "user"));
  const auto post_points = standardize(collect(features.post_features, posts, "post"));
  for (std::size_t v = 0; v < posts; ++v) {
    if (!features.share_time.count(v)) {
      throw DataError(fmt::format("missing share time for post index {}", v));
    }
  }

  Rearrangement r;
  r.user_groups = ordered_groups(kmeans(user_points, std::min(k_user, users), seed));
  r.post_groups = ordered_groups(kmeans(post_points, std::min(k_post, posts), seed + 1));

  r.user_perm.resize(users);
  std::iota(r.user_perm.begin(), r.user_perm.end(), 0);
  std::stable_sort(r.user_perm.begin(), r.user_perm.end(), [&](std::size_t a, std::size_t b) {
    return r.user_groups[a] < r.user_groups[b];
  });

  r.post_perm.resize(posts);
  std::iota(r.post_perm.begin(), r.post_perm.end(), 0);
  std::stable_sort(r.post_perm.begin(), r.post_perm.end(), [&](std::size_t a, std::size_t b) {
    if (r.post_groups[a] != r.post_groups[b]) return r.post_groups[a] < r.post_groups[b];
    return features.share_time.at(a) < features.share_time.at(b);
  });
  return r;
}

PTensor apply(const Rearrangement& r, const PTensor& tensor) {
  const Dims& d = tensor.dims();
  check_perm(r.user_perm, d.user, "user");
  check_perm(r.post_perm, d.post, "post");
  PTensor out(d);
  for (std::size_t i = 0; i < d.user; ++i) {
    for (std::size_t j = 0; j < d.post; ++j) {
      const std::size_t src = tensor.offset(r.user_perm[i], r.post_perm[j], 0);
      const std::size_t dst = out.offset(i, j, 0);
      std::copy_n(tensor.values().begin() + src, d.time, out.values().begin() + dst);
      std::copy_n(tensor.mask().begin() + src, d.time, out.mask().begin() + dst);
    }
  }
  return out;
}

PTensor invert(const Rearrangement& r, const PTensor& tensor) {
  const Dims& d = tensor.dims();
  check_perm(r.user_perm, d.user, "user");
  check_perm(r.post_perm, d.post, "post");
  PTensor out(d);
  for (std::size_t i = 0; i < d.user; ++i) {
    for (std::size_t j = 0; j < d.post; ++j) {
      const std::size_t src = tensor.offset(i, j, 0);
      const std::size_t dst = out.offset(r.user_perm[i], r.post_perm[j], 0);
      std::copy_n(tensor.values().begin() + src, d.time, out.values().begin() + dst);
      std::copy_n(tensor.mask().begin() + src, d.time, out.mask().begin() + dst);
    }
  }
  return out;
}

std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

bool is_permutation(const std::vector<std::size_t>& perm) {
  std::vector<bool> seen(perm.size(), false);
  for (auto p : perm) {
    if (p >= perm.size() || seen[p]) return false;
    seen[p] = true;
  }
  return true;
}

double mean_window_variance(const std::map<std::size_t, FeatureVector>& features,
                            const std::vector<std::size_t>& order, std::size_t window) {
  if (window == 0) throw ConfigError("window must be positive");
  double total = 0;
  std::size_t windows = 0;
  for (std::size_t start = 0; start < order.size(); start += window) {
    const std::size_t end = std::min(order.size(), start + window);
    const auto& first = features.at(order[start]);
    const double n = static_cast<double>(end - start);
    FeatureVector mean(first.size(), 0.0);
    for (std::size_t i = start; i < end; ++i) {
      const auto& f = features.at(order[i]);
      for (std::size_t d = 0; d < f.size(); ++d) mean[d] += f[d] / n;
    }
    double var = 0;
    for (std::size_t i = start; i < end; ++i) {
      const auto& f = features.at(order[i]);
      for (std::size_t d = 0; d < f.size(); ++d) var += (f[d] - mean[d]) * (f[d] - mean[d]) / n;
    }
    total += var;
    ++windows;
  }
  return windows ? total / static_cast<double>(windows) : 0.0;
}

}  // namespace mtpop
