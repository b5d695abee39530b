#include <gtest/gtest.h>

#include "mtpop/baselines.hpp"
#include "mtpop/error.hpp"
#include "oracles.hpp"

using namespace mtpop;

// ------------------------------------------------------------------ AV

TEST(AverageViews, IdenticalPhotoDominatesSmallPool) {
  const std::vector<AvCandidate> train{{{1, 0, 0}, 10, 7.0}, {{0, 1, 0}, 20, 1.0}, {{0, 0, 1}, 30, 2.0}};
  AvConfig only_best{5, 1};
  EXPECT_EQ(av_predict({2, 0, 0}, train, only_best), 7.0);
  // Fewer than k candidates: average of all of them.
  EXPECT_NEAR(av_predict({1, 0, 0}, train), (7.0 + 1.0 + 2.0) / 3.0, 1e-15);
}

TEST(AverageViews, ConstantPopularity) {
  Rng rng(51);
  std::vector<AvCandidate> train;
  for (int i = 0; i < 40; ++i) train.push_back({{standard_normal(rng), standard_normal(rng)}, i, 2.0});
  EXPECT_EQ(av_predict({0.3, -1.0}, train), 2.0);
}

TEST(AverageViews, RecencyAmongTies) {
  // Eight photos tie on similarity; the five most recent are averaged.
  std::vector<AvCandidate> train;
  for (int i = 0; i < 8; ++i) train.push_back({{1, 1}, i, static_cast<double>(i)});
  train.push_back({{-1, 0}, 100, 1000.0});
  EXPECT_NEAR(av_predict({2, 2}, train, {5, 3}), (3.0 + 4 + 5 + 6 + 7) / 5.0, 1e-12);
}

TEST(AverageViews, WithinNeighbourRange) {
  Rng rng(52);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<AvCandidate> train;
    double lo = 1e9, hi = -1e9;
    for (int i = 0; i < 30; ++i) {
      const double s = standard_normal(rng);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
      train.push_back({{standard_normal(rng), standard_normal(rng), standard_normal(rng)},
                       static_cast<std::int64_t>(uniform_index(rng, 100)), s});
    }
    const double p = av_predict({standard_normal(rng), standard_normal(rng), standard_normal(rng)}, train);
    EXPECT_GE(p, lo);
    EXPECT_LE(p, hi);
  }
}

TEST(AverageViews, Errors) {
  const std::vector<AvCandidate> train{{{1.0}, 0, 1.0}};
  EXPECT_THROW(av_predict({}, train), DataError);
  EXPECT_THROW(av_predict({1.0}, {}), DataError);
  EXPECT_THROW(av_predict({1.0, 2.0}, train), DataError);
  EXPECT_NEAR(cosine_similarity({1, 0}, {0, 1}), 0.0, 1e-15);
  EXPECT_NEAR(cosine_similarity({1, 1}, {2, 2}), 1.0, 1e-15);
}

// ------------------------------------------------------------------ LR

TEST(LinearRegression, ExactLinearFit) {
  Rng rng(53);
  const Eigen::MatrixXd x = oracle::random_matrix(rng, 30, 4);
  const Eigen::Vector4d w(1.5, -2.0, 0.25, 3.0);
  const Eigen::VectorXd y = (x * w).array() + 0.75;
  const auto model = lr_fit(x, y, 0.0);
  EXPECT_LT((lr_predict(model, x) - y).lpNorm<Eigen::Infinity>(), 1e-8);
  EXPECT_NEAR(model.weights(4), 0.75, 1e-10);
}

TEST(LinearRegression, MatchesPseudoInverse) {
  Rng rng(54);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd x = oracle::random_matrix(rng, 25, 5);
    const Eigen::VectorXd y = oracle::random_matrix(rng, 25, 1);
    Eigen::MatrixXd xa(25, 6);
    xa << x, Eigen::VectorXd::Ones(25);
    const Eigen::VectorXd expect = xa.completeOrthogonalDecomposition().pseudoInverse() * y;
    const auto model = lr_fit(x, y, 0.0);
    EXPECT_LT((model.weights - expect).norm(), 1e-8);
  }
}

TEST(LinearRegression, RidgeLeavesInterceptUnpenalised) {
  Rng rng(55);
  const Eigen::MatrixXd x = oracle::random_matrix(rng, 40, 3);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(40, 5.0);
  const auto model = lr_fit(x, y, 1e3);
  EXPECT_LT(model.weights.head(3).norm(), 1e-10);
  EXPECT_NEAR(model.weights(3), 5.0, 1e-10);
}

TEST(LinearRegression, OnesColumnWithoutInterceptGivesMean) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 1);
  const Eigen::Vector4d y(1, 2, 3, 6);
  const auto model = lr_fit(x, y, 0.0, false);
  EXPECT_NEAR(model.weights(0), 3.0, 1e-12);
}

TEST(LinearRegression, SingularSystemAdvisesRidge) {
  Eigen::MatrixXd x(4, 2);
  x << 1, 2, 2, 4, 3, 6, 4, 8;
  const Eigen::Vector4d y(1, 2, 3, 4);
  try {
    lr_fit(x, y, 0.0);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("ridge"), std::string::npos);
  }
  EXPECT_NO_THROW(lr_fit(x, y, 1e-3));
}

// ------------------------------------------------------------------ BG

TEST(BipartiteGraph, DegreesAreWeightSums) {
  const BipartiteGraph g(2, 2, {{0, 0, 1.0}, {0, 1, 2.0}, {1, 1, 3.0}});
  EXPECT_EQ(g.degree(0), 3.0);
  EXPECT_EQ(g.degree(1), 3.0);
  EXPECT_EQ(g.degree(g.post_node(0)), 1.0);
  EXPECT_EQ(g.degree(g.post_node(1)), 5.0);
  EXPECT_THROW(BipartiteGraph(1, 1, {{0, 1, 1.0}}), IndexError);
  EXPECT_THROW(BipartiteGraph(1, 1, {{0, 0, -1.0}}), ConfigError);
}

TEST(BipartiteGraph, SingleEdgePropagatesScore) {
  const BipartiteGraph g(1, 1, {{0, 0, 2.0}});
  const auto r = bg_fit(g, {{0, 1.7}}, {1.0, 500, 1e-12});
  EXPECT_NEAR(r.scores[1], 1.7, 1e-9);
  EXPECT_LE(r.objective_history.back(), r.objective_history.front());
}

TEST(BipartiteGraph, TwoObservedNodesClosedForm) {
  // mu (a - s)^2 + mu (b - t)^2 + (a - b)^2 / 2: a + b = s + t, a - b = mu (s - t) / (mu + 1).
  const BipartiteGraph g(1, 1, {{0, 0, 3.0}});
  for (double mu : {0.5, 1.0, 4.0}) {
    const auto r = bg_fit(g, {{0, 2.0}, {1, -1.0}}, {mu, 10000, 1e-14});
    EXPECT_NEAR(r.scores[0] + r.scores[1], 1.0, 1e-9);
    EXPECT_NEAR(r.scores[0] - r.scores[1], mu * 3.0 / (mu + 1.0), 1e-9);
  }
}

TEST(BipartiteGraph, EqualScoresOnRegularGraphAreFixedPoint) {
  std::vector<BipartiteEdge> edges;
  for (std::size_t u = 0; u < 3; ++u)
    for (std::size_t p = 0; p < 3; ++p) edges.push_back({u, p, 1.0});
  const BipartiteGraph g(3, 3, edges);
  std::map<std::size_t, double> obs;
  for (std::size_t x = 0; x < 6; ++x) obs[x] = 2.5;
  const auto r = bg_fit(g, obs);
  for (double f : r.scores) EXPECT_NEAR(f, 2.5, 1e-12);
}

TEST(BipartiteGraph, ObjectiveNonIncreasingOnRandomGraphs) {
  Rng rng(56);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<BipartiteEdge> edges;
    for (std::size_t u = 0; u < 8; ++u)
      for (std::size_t p = 0; p < 10; ++p)
        if (uniform_unit(rng) < 0.3) edges.push_back({u, p, 0.1 + uniform_unit(rng)});
    edges.push_back({0, 0, 1.0});
    const BipartiteGraph g(8, 10, edges);
    std::map<std::size_t, double> obs;
    for (std::size_t x = 0; x < g.nodes(); ++x)
      if (uniform_unit(rng) < 0.4) obs[x] = standard_normal(rng);
    obs[0] = 1.0;
    const auto r = bg_fit(g, obs, {0.7, 100, 1e-9});
    for (std::size_t i = 1; i < r.objective_history.size(); ++i)
      EXPECT_LE(r.objective_history[i], r.objective_history[i - 1] + 1e-12);
  }
}

TEST(BipartiteGraph, UnanchoredComponentGetsGlobalMean) {
  const BipartiteGraph g(2, 2, {{0, 0, 1.0}, {1, 1, 1.0}});
  const auto r = bg_fit(g, {{0, 1.0}, {2, 3.0}});
  EXPECT_EQ(r.scores[1], 2.0);
  EXPECT_EQ(r.scores[3], 2.0);
  EXPECT_THROW(bg_fit(BipartiteGraph(1, 1, {{0, 0, 0.0}}), {{0, 1.0}}), ConfigError);
  EXPECT_THROW(bg_fit(g, {{0, 1.0}}, {0.0, 10, 1e-6}), ConfigError);
}

// ------------------------------------------------------------------ TMF

namespace {

double tmf_rel_error(const TMFModel& m, const PTensor& r) {
  double num = 0, den = 0;
  const Dims& d = r.dims();
  for (std::size_t u = 0; u < d.user; ++u)
    for (std::size_t v = 0; v < d.post; ++v)
      for (std::size_t t = 0; t < d.time; ++t) {
        const double e = r.at(u, v, t) - m.predict(u, v, t);
        num += e * e;
        den += r.at(u, v, t) * r.at(u, v, t);
      }
  return std::sqrt(num / den);
}

// Central differences of the objective with respect to one parameter.
double fd(TMFModel m, const PTensor& r, Eigen::MatrixXd TMFModel::*field, Eigen::Index i, double h) {
  const double x = (m.*field).data()[i];
  (m.*field).data()[i] = x + h;
  const double up = tmf_objective(m, r);
  (m.*field).data()[i] = x - h;
  const double down = tmf_objective(m, r);
  return (up - down) / (2.0 * h);
}

}  // namespace

TEST(Tmf, RankOneNoiselessReconstruction) {
  Rng rng(57);
  PTensor r({10, 12, 2});
  std::vector<double> a(10), b(12);
  for (auto& x : a) x = 1.0 + 0.5 * standard_normal(rng);
  for (auto& x : b) x = 1.0 + 0.5 * standard_normal(rng);
  for (std::size_t u = 0; u < 10; ++u)
    for (std::size_t v = 0; v < 12; ++v)
      for (std::size_t t = 0; t < 2; ++t) r.set_observed(u, v, t, a[u] * b[v]);
  TmfConfig cfg;
  cfg.rank = 1;
  cfg.lambda_u = cfg.lambda_v = 1e-6;
  cfg.epochs = 400;
  const auto m = tmf_fit(r, cfg);
  EXPECT_LT(tmf_rel_error(m, r), 1e-2);
  EXPECT_LT(m.loss_history.back(), m.loss_history.front());
}

TEST(Tmf, ConstantTensorAbsorbedByBiases) {
  PTensor r({5, 6, 3});
  for (std::size_t k = 0; k < r.size(); ++k) {
    r.values()[k] = 4.0;
    r.mask()[k] = 1;
  }
  TmfConfig cfg;
  cfg.lambda_u = cfg.lambda_v = 1e-6;
  cfg.epochs = 1000;
  const auto m = tmf_fit(r, cfg);
  for (std::size_t u = 0; u < 5; ++u)
    for (std::size_t v = 0; v < 6; ++v) EXPECT_NEAR(tmf_predict(m, u, v, 1), 4.0, 1e-2);
  EXPECT_THROW(tmf_predict(m, 5, 0, 0), IndexError);
}

TEST(Tmf, GradientMatchesFiniteDifferences) {
  Rng rng(58);
  const PTensor r = oracle::random_tensor(rng, {4, 5, 3}, 0.6);
  TmfConfig cfg;
  cfg.rank = 2;
  cfg.lambda_u = 0.3;
  cfg.lambda_v = 0.7;
  TMFModel m = tmf_init(r.dims(), cfg);
  m.user_bias = oracle::random_matrix(rng, 4, 3);
  m.post_bias = oracle::random_matrix(rng, 5, 3);
  const auto g = tmf_gradient(m, r);
  for (Eigen::Index i = 0; i < m.user_factors.size(); ++i)
    EXPECT_NEAR(g.user_factors.data()[i], fd(m, r, &TMFModel::user_factors, i, 1e-5), 1e-6);
  for (Eigen::Index i = 0; i < m.post_bias.size(); ++i)
    EXPECT_NEAR(g.post_bias.data()[i], fd(m, r, &TMFModel::post_bias, i, 1e-5), 1e-6);
}

TEST(Tmf, DeterministicAndErrors) {
  Rng rng(59);
  const PTensor r = oracle::random_tensor(rng, {6, 6, 4}, 0.5);
  TmfConfig cfg;
  cfg.seed = 3;
  cfg.epochs = 5;
  const auto a = tmf_fit(r, cfg), b = tmf_fit(r, cfg);
  EXPECT_EQ(a.user_factors, b.user_factors);
  EXPECT_EQ(a.loss_history, b.loss_history);
  cfg.learning_rate = 50.0;
  EXPECT_THROW(tmf_fit(r, cfg), NumericError);
  cfg.learning_rate = 0.01;
  cfg.rank = 0;
  EXPECT_THROW(tmf_fit(r, cfg), ConfigError);
  PTensor sparse({3, 3, 1});
  sparse.set_observed(0, 0, 0, 1.0);
  cfg.rank = 2;
  EXPECT_THROW(tmf_fit(sparse, cfg), ConfigError);
}
