#include <gtest/gtest.h>

#include <limits>
#include <numeric>

#include "mtpop/error.hpp"
#include "mtpop/rearrange.hpp"
#include "oracles.hpp"

using namespace mtpop;

namespace {

// Minimum WCSS over every assignment of the points to two non-empty groups.
std::vector<std::size_t> brute_force_two_means(const std::vector<FeatureVector>& pts) {
  const std::size_t n = pts.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_assign;
  for (std::size_t mask = 1; mask + 1 < (1u << n); ++mask) {
    std::vector<std::size_t> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = (mask >> i) & 1u;
    std::vector<FeatureVector> c(2, FeatureVector(pts[0].size(), 0.0));
    std::vector<double> cnt(2, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      cnt[a[i]] += 1;
      for (std::size_t d = 0; d < pts[i].size(); ++d) c[a[i]][d] += pts[i][d];
    }
    double w = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d < pts[i].size(); ++d) {
        const double diff = pts[i][d] - c[a[i]][d] / cnt[a[i]];
        w += diff * diff;
      }
    if (w < best) {
      best = w;
      best_assign = a;
    }
  }
  return best_assign;
}

bool same_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

ContextFeatures flat_features(std::size_t users, std::size_t posts) {
  ContextFeatures f;
  for (std::size_t u = 0; u < users; ++u) f.user_features[u] = {1.0, 2.0};
  for (std::size_t v = 0; v < posts; ++v) {
    f.post_features[v] = {3.0};
    f.share_time[v] = 0;
  }
  return f;
}

}  // namespace

TEST(KMeans, MatchesBruteForceTwoPartition) {
  const std::vector<FeatureVector> pts{{0, 0}, {0.1, 0}, {10, 10}, {10.2, 10}};
  const auto km = kmeans(pts, 2, 0);
  EXPECT_TRUE(same_partition(km.assignment, brute_force_two_means(pts)));
  EXPECT_EQ(km.assignment[0], km.assignment[1]);
  EXPECT_NE(km.assignment[0], km.assignment[2]);
}

TEST(KMeans, RandomInstancesMatchBruteForce) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<FeatureVector> pts;
    for (int i = 0; i < 8; ++i) {
      const double offset = i < 4 ? 0.0 : 8.0;
      pts.push_back({offset + standard_normal(rng), offset + standard_normal(rng)});
    }
    const auto km = kmeans(pts, 2, static_cast<std::uint64_t>(trial));
    EXPECT_TRUE(same_partition(km.assignment, brute_force_two_means(pts))) << "trial " << trial;
  }
}

TEST(KMeans, SingleClusterAndOnePerPoint) {
  const std::vector<FeatureVector> pts{{1}, {2}, {4}, {8}};
  for (auto a : kmeans(pts, 1, 3).assignment) EXPECT_EQ(a, 0u);
  const auto all = kmeans(pts, 4, 3);
  EXPECT_NEAR(wcss(pts, all.assignment, all.centroids), 0.0, 1e-15);
  std::vector<std::size_t> seen = all.assignment;
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(KMeans, WcssNonIncreasingAndDeterministic) {
  Rng rng(12);
  std::vector<FeatureVector> pts;
  for (int i = 0; i < 200; ++i) pts.push_back({standard_normal(rng), standard_normal(rng), standard_normal(rng)});
  const auto a = kmeans(pts, 6, 9);
  for (std::size_t i = 1; i < a.wcss_history.size(); ++i) EXPECT_LE(a.wcss_history[i], a.wcss_history[i - 1] + 1e-12);
  const auto b = kmeans(pts, 6, 9);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.wcss_history, b.wcss_history);
}

TEST(KMeans, Errors) {
  EXPECT_THROW(kmeans({}, 1, 0), ConfigError);
  EXPECT_THROW(kmeans({{1.0}, {2.0}}, 3, 0), ConfigError);
  EXPECT_THROW(kmeans({{1.0}, {2.0}}, 0, 0), ConfigError);
  EXPECT_THROW(kmeans({{1.0}, {2.0, 3.0}}, 1, 0), ConfigError);
}

TEST(Standardize, ZScoresAndConstantColumns) {
  const auto z = standardize({{1, 5}, {3, 5}});
  EXPECT_DOUBLE_EQ(z[0][0], -z[1][0]);
  EXPECT_EQ(z[0][1], 0.0);
  EXPECT_EQ(z[1][1], 0.0);
}

TEST(Rearrangement, DegenerateFeaturesSortPostsByTime) {
  ContextFeatures f = flat_features(3, 5);
  const std::vector<std::int64_t> times{50, 10, 40, 20, 30};
  for (std::size_t v = 0; v < 5; ++v) f.share_time[v] = times[v];
  const Rearrangement r = build_rearrangement(f, 3, 5, 2, 2, 0);
  EXPECT_EQ(r.post_perm, (std::vector<std::size_t>{1, 3, 4, 2, 0}));
  EXPECT_TRUE(is_permutation(r.user_perm));
}

TEST(Rearrangement, SingleUserReverseTimes) {
  ContextFeatures f = flat_features(1, 4);
  for (std::size_t v = 0; v < 4; ++v) f.share_time[v] = static_cast<std::int64_t>(100 - v);
  const Rearrangement r = build_rearrangement(f, 1, 4, 1, 1, 0);
  EXPECT_EQ(r.post_perm, (std::vector<std::size_t>{3, 2, 1, 0}));
}

TEST(Rearrangement, SeparatedUserClustersBecomeContiguous) {
  Rng rng(13);
  ContextFeatures f = flat_features(20, 3);
  std::vector<std::size_t> planted(20);
  for (std::size_t u = 0; u < 20; ++u) {
    planted[u] = uniform_index(rng, 2);
    const double c = planted[u] ? 10.0 : -10.0;
    f.user_features[u] = {c + 0.1 * standard_normal(rng), c + 0.1 * standard_normal(rng)};
  }
  const Rearrangement r = build_rearrangement(f, 20, 3, 2, 1, 4);
  std::size_t switches = 0;
  for (std::size_t i = 1; i < 20; ++i) switches += planted[r.user_perm[i]] != planted[r.user_perm[i - 1]];
  EXPECT_EQ(switches, 1u);
}

TEST(Rearrangement, MissingFeatureNamesIndex) {
  ContextFeatures f = flat_features(3, 3);
  f.user_features.erase(2);
  try {
    build_rearrangement(f, 3, 3, 1, 1, 0);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos) << e.what();
  }
  ContextFeatures g = flat_features(3, 3);
  g.share_time.erase(1);
  EXPECT_THROW(build_rearrangement(g, 3, 3, 1, 1, 0), DataError);
}

TEST(Rearrangement, Deterministic) {
  Rng rng(14);
  ContextFeatures f;
  for (std::size_t u = 0; u < 30; ++u) f.user_features[u] = {standard_normal(rng), standard_normal(rng)};
  for (std::size_t v = 0; v < 30; ++v) {
    f.post_features[v] = {standard_normal(rng)};
    f.share_time[v] = static_cast<std::int64_t>(uniform_index(rng, 1000));
  }
  const auto a = build_rearrangement(f, 30, 30, 5, 5, 8);
  const auto b = build_rearrangement(f, 30, 30, 5, 5, 8);
  EXPECT_EQ(a.user_perm, b.user_perm);
  EXPECT_EQ(a.post_perm, b.post_perm);
}

TEST(Permutation, ApplyInvertRoundTrip) {
  Rng rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    const PTensor t = oracle::random_tensor(rng, {5, 7, 3}, 0.4);
    Rearrangement r = Rearrangement::identity(5, 7);
    EXPECT_EQ(apply(r, t), t);
    r.user_perm = random_permutation(5, rng);
    r.post_perm = random_permutation(7, rng);
    EXPECT_EQ(invert(r, apply(r, t)), t);
    EXPECT_EQ(apply(r, invert(r, t)), t);
  }
}

TEST(Permutation, ObservedEntryMovesWithValue) {
  PTensor t({3, 2, 2});
  t.set_observed(0, 1, 1, 7.0);
  Rearrangement r = Rearrangement::identity(3, 2);
  r.user_perm = {2, 0, 1};  // position 1 holds original user 0
  r.post_perm = {1, 0};     // position 0 holds original post 1
  const PTensor out = apply(r, t);
  EXPECT_TRUE(out.observed(1, 0, 1));
  EXPECT_EQ(out.at(1, 0, 1), 7.0);
  EXPECT_EQ(out.observed_count(), 1u);
  r.user_perm = {0, 1};
  EXPECT_THROW(apply(r, t), ConfigError);
}

TEST(Permutation, InverseAndCheck) {
  const std::vector<std::size_t> p{2, 0, 3, 1};
  const auto q = inverse_permutation(p);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(q[p[i]], i);
  EXPECT_TRUE(is_permutation(p));
  EXPECT_FALSE(is_permutation({0, 0, 1}));
  EXPECT_FALSE(is_permutation({0, 3}));
}

TEST(Homogeneity, WindowVarianceDropsAfterRearrangement) {
  Rng rng(16);
  ContextFeatures f = flat_features(40, 1);
  for (std::size_t u = 0; u < 40; ++u) {
    const double c = static_cast<double>(u % 4) * 5.0;
    f.user_features[u] = {c + 0.2 * standard_normal(rng), -c + 0.2 * standard_normal(rng)};
  }
  const Rearrangement r = build_rearrangement(f, 40, 1, 4, 1, 2);
  std::vector<std::size_t> identity(40);
  std::iota(identity.begin(), identity.end(), 0);
  EXPECT_LT(mean_window_variance(f.user_features, r.user_perm, 10),
            0.5 * mean_window_variance(f.user_features, identity, 10));
}
