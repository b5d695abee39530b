#include <gtest/gtest.h>

#include <regex>

#include "mtpop/error.hpp"
#include "mtpop/solver.hpp"
#include "oracles.hpp"

using namespace mtpop;

namespace {

// Closed-form prox of the nuclear norm through the eigenvectors of m^T m:
// X = m V diag(max(1 - lambda / sigma, 0)) V^T.
Eigen::MatrixXd svt_eig(const Eigen::MatrixXd& m, double lambda) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.transpose() * m);
  Eigen::VectorXd w(m.cols());
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    const double sigma = std::sqrt(std::max(es.eigenvalues()(i), 0.0));
    w(i) = sigma > lambda ? 1.0 - lambda / sigma : 0.0;
  }
  return m * es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
}

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

// Rank-one-per-block tensor with the given layout.
PTensor planted_rank_one(Rng& rng, const CULayout& layout) {
  PTensor t(layout.dims);
  for (const auto& b : layout.blocks) {
    std::vector<double> a(b.extents.user * b.extents.post), c(b.extents.time);
    for (auto& x : a) x = standard_normal(rng) + 2.0;
    for (auto& x : c) x = standard_normal(rng) + 2.0;
    for (std::size_t u = 0; u < b.extents.user; ++u)
      for (std::size_t v = 0; v < b.extents.post; ++v)
        for (std::size_t s = 0; s < b.extents.time; ++s)
          t.set_observed(b.location.user + u, b.location.post + v, b.location.time + s,
                         a[u * b.extents.post + v] * c[s]);
  }
  return t;
}

}  // namespace

TEST(NuclearNorm, DiagonalZeroAndEigenOracle) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 3;
  d(1, 1) = 1;
  EXPECT_NEAR(nuclear_norm(d), 4.0, 1e-14);
  EXPECT_EQ(nuclear_norm(Eigen::MatrixXd::Zero(3, 2)), 0.0);
  Rng rng(31);
  for (int i = 0; i < 10; ++i) {
    const auto m = oracle::random_matrix(rng, 5, 4);
    EXPECT_NEAR(nuclear_norm(m), oracle::nuclear_norm_eig(m), 1e-10);
  }
  Eigen::MatrixXd bad = d;
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(nuclear_norm(bad), NumericError);
}

TEST(SvdFactors, ReconstructsAndSorted) {
  Rng rng(32);
  const auto m = oracle::random_matrix(rng, 7, 4);
  const auto f = svd_factors(m);
  EXPECT_LT(rel_err(f.left * f.singulars.asDiagonal() * f.right.transpose(), m), 1e-12);
  for (Eigen::Index i = 1; i < f.singulars.size(); ++i) EXPECT_LE(f.singulars(i), f.singulars(i - 1));
  EXPECT_GE(f.singulars.minCoeff(), 0.0);
  EXPECT_LT((f.left.transpose() * f.left - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-12);
}

TEST(Svt, DiagonalThresholding) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 3;
  d(1, 1) = 1;
  const auto x = svt(d, 2.0);
  EXPECT_NEAR(x(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(x(1, 1), 0.0, 1e-14);
  EXPECT_NEAR(x(0, 1), 0.0, 1e-14);
  Rng rng(33);
  const auto m = oracle::random_matrix(rng, 4, 3);
  EXPECT_EQ(svt(m, svd_factors(m).singulars(0) + 1e-9).norm(), 0.0);
  EXPECT_THROW(svt(m, 0.0), ConfigError);
}

TEST(Svt, MatchesClosedFormAndBeatsPerturbations) {
  Rng rng(34);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = oracle::random_matrix(rng, 6, 5);
    const auto x = svt(m, 0.5);
    EXPECT_LT((x - svt_eig(m, 0.5)).norm(), 1e-9);
    const double best = oracle::prox_objective(x, m, 0.5);
    for (double eps : {1e-3, 1e-2}) {
      for (int k = 0; k < 20; ++k) {
        const Eigen::MatrixXd e = oracle::random_matrix(rng, 6, 5);
        EXPECT_LE(best, oracle::prox_objective(x + eps * e / e.norm(), m, 0.5));
      }
    }
  }
}

TEST(Svt, ShrinkageIsMonotoneInLambda) {
  Rng rng(35);
  const auto m = oracle::random_matrix(rng, 8, 6);
  double previous = nuclear_norm(m);
  for (double lambda : {0.1, 0.3, 0.7, 1.2, 2.0, 5.0}) {
    const auto x = svt(m, lambda);
    const double nn = nuclear_norm(x);
    EXPECT_LE(nn, previous + 1e-12);
    previous = nn;
  }
}

TEST(BlockLambda, RuleAndScaling) {
  SolverConfig cfg;
  EXPECT_NEAR(block_lambda({4, 4, 9}, cfg), 4.0 + 3.0, 1e-15);
  cfg.lambda_mode = LambdaMode::scaled;
  cfg.lambda_scale = 0.5;
  EXPECT_NEAR(block_lambda({4, 4, 9}, cfg), 3.5, 1e-15);
}

TEST(BlockwiseSvt, SingleBlockEqualsMatrixSvt) {
  Rng rng(36);
  const PTensor t = oracle::random_tensor(rng, {3, 2, 5});
  const auto layout = plan_layout(t.dims(), {"w", 5}, 3, 2);
  ASSERT_EQ(layout.block_count(), 1u);
  SolverConfig cfg;
  cfg.lambda_mode = LambdaMode::scaled;
  cfg.lambda_scale = 0.2;
  const auto r = blockwise_svt(t, layout, cfg);
  const RowMatrix unfolded = unfold_time(extract_block(t, {0, 0, 0}, t.dims()));
  const Eigen::MatrixXd expect = svt(unfolded, block_lambda(t.dims(), cfg));
  const RowMatrix got = unfold_time(extract_block(r.tensor, {0, 0, 0}, t.dims()));
  EXPECT_LT((Eigen::MatrixXd(got) - expect).norm(), 1e-12);
  EXPECT_EQ(r.tensor.mask(), t.mask());
}

TEST(BlockwiseSvt, ZeroBlockIsDropped) {
  Rng rng(37);
  PTensor t = oracle::random_tensor(rng, {4, 2, 4});
  for (std::size_t u = 0; u < 2; ++u)
    for (std::size_t v = 0; v < 2; ++v)
      for (std::size_t s = 0; s < 4; ++s) t.set_observed(u, v, s, 0.0);
  CULayout layout{{"w", 4}, t.dims(), {2, 2, 4}, {{{0, 0, 0}, {2, 2, 4}}, {{2, 0, 0}, {2, 2, 4}}}};
  SolverConfig cfg;
  cfg.lambda_mode = LambdaMode::scaled;
  cfg.lambda_scale = 0.01;
  const auto r = blockwise_svt(t, layout, cfg);
  EXPECT_TRUE(r.dropped[0]);
  EXPECT_FALSE(r.dropped[1]);
  EXPECT_EQ(r.kept_blocks(), 1u);
  for (std::size_t u = 0; u < 2; ++u)
    for (std::size_t v = 0; v < 2; ++v)
      for (std::size_t s = 0; s < 4; ++s) EXPECT_EQ(r.tensor.at(u, v, s), 0.0);
}

TEST(BlockwiseSvt, PlantedRankOnePerBlock) {
  Rng rng(38);
  // Tall 64x16 unfoldings go through the Gram path, the 10x16 trailing ones through the SVD.
  const auto layout = plan_layout({8, 10, 40}, {"w", 16}, 8, 8);
  const PTensor t = planted_rank_one(rng, layout);
  SolverConfig cfg;
  cfg.lambda_mode = LambdaMode::scaled;
  cfg.lambda_scale = 1e-3;
  const auto r = blockwise_svt(t, layout, cfg);
  for (const auto& b : layout.blocks) {
    const Eigen::MatrixXd block = unfold_time(extract_block(t, b.location, b.extents));
    const Eigen::MatrixXd expect = svt_eig(block, block_lambda(b.extents, cfg));
    const Eigen::MatrixXd got = unfold_time(extract_block(r.tensor, b.location, b.extents));
    EXPECT_LT(rel_err(got, expect), 1e-6);
    EXPECT_LT(rel_err(got, block), 1e-2);
  }
}

TEST(BlockwiseSvt, ThreadCountDoesNotChangeResult) {
  Rng rng(39);
  const PTensor t = oracle::random_tensor(rng, {16, 16, 32});
  const auto layout = plan_layout(t.dims(), {"w", 7}, 4, 4);
  SolverConfig one, many;
  one.lambda_mode = many.lambda_mode = LambdaMode::scaled;
  one.lambda_scale = many.lambda_scale = 0.3;
  many.threads = 4;
  EXPECT_EQ(blockwise_svt(t, layout, one).tensor, blockwise_svt(t, layout, many).tensor);
}

TEST(Admm, FullyObservedLowRankRecovered) {
  Rng rng(40);
  const auto layout = plan_layout({8, 8, 16}, {"w", 16}, 8, 8);
  const PTensor r = planted_rank_one(rng, layout);
  SolverConfig cfg;
  cfg.lambda_mode = LambdaMode::scaled;
  cfg.lambda_scale = 1e-9;
  const auto fit = admm_fit(r, {layout}, cfg);
  double num = 0, den = 0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double d = fit.state.scale_components[0].values()[k] - r.values()[k];
    num += d * d;
    den += r.values()[k] * r.values()[k];
  }
  EXPECT_LT(std::sqrt(num / den), 1e-6);
  EXPECT_EQ(fit.completed.values(), r.values());
}

TEST(Admm, SingleObservedEntryReproduced) {
  PTensor r({3, 3, 4});
  r.set_observed(1, 2, 3, 4.25);
  const auto layout = plan_layout(r.dims(), {"w", 2}, 1, 1);
  const auto fit = admm_fit(r, {layout}, {});
  EXPECT_EQ(fit.completed.at(1, 2, 3), 4.25);
  EXPECT_TRUE(fit.completed.observed(1, 2, 3));
  EXPECT_EQ(fit.completed.observed_count(), 1u);
}

TEST(Admm, Errors) {
  PTensor empty({2, 2, 2});
  const auto layout = plan_layout(empty.dims(), {"w", 2}, 1, 1);
  EXPECT_THROW(admm_fit(empty, {layout}, {}), ConfigError);
  PTensor one = empty;
  one.set_observed(0, 0, 0, 1.0);
  EXPECT_THROW(admm_fit(one, {}, {}), ConfigError);
  const auto other = plan_layout({2, 2, 3}, {"w", 2}, 1, 1);
  EXPECT_THROW(admm_fit(one, {other}, {}), ConfigError);
  SolverConfig bad;
  bad.tol = 0;
  EXPECT_THROW(admm_fit(one, {layout}, bad), ConfigError);
  one.set_observed(1, 1, 1, std::numeric_limits<double>::infinity());
  EXPECT_THROW(admm_fit(one, {layout}, {}), NumericError);
}

TEST(Admm, ZeroComponentIsNeverSelected) {
  Rng rng(41);
  // Values far below the default threshold: every block shrinks to zero.
  const PTensor r = scale(oracle::random_tensor(rng, {6, 6, 16}, 0.5), 0.01);
  const std::vector<CULayout> layouts{plan_layout(r.dims(), {"fine", 4}, 2, 2),
                                      plan_layout(r.dims(), {"coarse", 16}, 6, 6)};
  const auto fit = admm_fit(r, layouts, {});
  for (std::size_t i = 0; i < layouts.size(); ++i) {
    for (double x : fit.state.scale_components[i].values()) ASSERT_EQ(x, 0.0);
    EXPECT_FALSE(fit.state.active[i]) << "scale " << i;
  }
  for (std::size_t k = 0; k < r.size(); ++k) {
    EXPECT_EQ(fit.completed.values()[k], r.mask()[k] ? r.values()[k] : 0.0);
  }
}

TEST(Admm, DeterministicAndLogs) {
  Rng rng(42);
  const PTensor r = oracle::random_tensor(rng, {8, 8, 24}, 0.6);
  const std::vector<CULayout> layouts{plan_layout(r.dims(), {"a", 4}, 2, 2),
                                      plan_layout(r.dims(), {"b", 12}, 4, 4)};
  SolverConfig cfg;
  cfg.lambda_mode = LambdaMode::scaled;
  cfg.lambda_scale = 0.2;
  cfg.random_init = true;
  cfg.seed = 5;
  std::vector<std::string> lines;
  cfg.log = [&](const std::string& s) { lines.push_back(s); };
  const auto a = admm_fit(r, layouts, cfg);
  cfg.log = nullptr;
  const auto b = admm_fit(r, layouts, cfg);
  EXPECT_EQ(a.completed, b.completed);
  EXPECT_EQ(a.state.residual_history, b.state.residual_history);
  ASSERT_EQ(lines.size(), a.state.iter);
  const std::regex pattern(R"(iter=\d+ residual=[0-9.eE+-]+ active=[01]{2})");
  for (const auto& l : lines) EXPECT_TRUE(std::regex_match(l, pattern)) << l;
  EXPECT_EQ(lines.front().rfind("iter=1 ", 0), 0u);
}

TEST(Admm, ObservedResidualDefinition) {
  PTensor r({1, 1, 2});
  r.set_observed(0, 0, 0, 3.0);
  r.set_observed(0, 0, 1, 4.0);
  PTensor z({1, 1, 2});
  z.values() = {3.0, 0.0};
  EXPECT_NEAR(observed_residual(r, {z}, {true}), 4.0 / 5.0, 1e-15);
  EXPECT_NEAR(observed_residual(r, {z}, {false}), 1.0, 1e-15);
}

TEST(Predict, ReturnsValuesInQueryOrder) {
  PTensor t({2, 2, 2});
  t.set_observed(1, 0, 1, 2.5);
  t.values()[t.offset(0, 1, 0)] = -1.0;
  EXPECT_EQ(predict(t, {{0, 1, 0}, {1, 0, 1}}), (std::vector<double>{-1.0, 2.5}));
  EXPECT_THROW(predict(t, {{2, 0, 0}}), IndexError);
}
