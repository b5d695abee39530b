#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mtpop/rearrange.hpp"
#include "mtpop/tensor.hpp"

namespace mtpop {

// ------------------------------------------------------------ average views

/// A training photo as seen by the average-views predictor.
struct AvCandidate {
  FeatureVector features;
  std::int64_t share_time = 0;
  double popularity = 0.0;
};

struct AvConfig {
  std::size_t neighbours = 5;
  /// Candidates ranked by cosine similarity; everything tied with the
  /// pool_size-th best similarity qualifies.
  std::size_t pool_size = 20;
};

/// Mean popularity of the `neighbours` most recent photos among the most
/// similar ones. Throws DataError when the query has no features or the
/// pool is empty.
double av_predict(const FeatureVector& query, const std::vector<AvCandidate>& train,
                  const AvConfig& cfg = {});

double cosine_similarity(const FeatureVector& a, const FeatureVector& b);

// --------------------------------------------------------- ridge regression

/// Ridge least squares. With an intercept it is the last weight and is not
/// penalised.
struct LinearModel {
  Eigen::VectorXd weights;
  bool intercept = true;
  double predict(const Eigen::VectorXd& x) const;
};

/// Throws NumericError when the normal equations are singular.
LinearModel lr_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge,
                   bool intercept = true);
Eigen::VectorXd lr_predict(const LinearModel& model, const Eigen::MatrixXd& x);

// ---------------------------------------------------------- bipartite graph

struct BipartiteEdge {
  std::size_t user = 0;
  std::size_t post = 0;
  double weight = 0.0;
};

/// Users occupy node ids [0, users), posts [users, users + posts).
class BipartiteGraph {
 public:
  BipartiteGraph(std::size_t users, std::size_t posts, std::vector<BipartiteEdge> edges);

  std::size_t users() const { return users_; }
  std::size_t posts() const { return posts_; }
  std::size_t nodes() const { return users_ + posts_; }
  std::size_t post_node(std::size_t post) const { return users_ + post; }
  double degree(std::size_t node) const { return degree_[node]; }
  const std::vector<BipartiteEdge>& edges() const { return edges_; }
  /// (neighbour node, weight) pairs per node.
  const std::vector<std::pair<std::size_t, double>>& neighbours(std::size_t node) const {
    return adjacency_[node];
  }

 private:
  std::size_t users_, posts_;
  std::vector<BipartiteEdge> edges_;
  std::vector<double> degree_;
  std::vector<std::vector<std::pair<std::size_t, double>>> adjacency_;
};

struct BgConfig {
  double fit_weight = 1.0;  // mu
  std::size_t max_sweeps = 200;
  double tol = 1e-6;
};

struct BgResult {
  std::vector<double> scores;
  std::vector<double> objective_history;  // after init, then after each sweep
  std::size_t sweeps = 0;
};

/// mu * sum_observed (f - s)^2 + 1/2 sum w_ij (f_i / sqrt(d_i) - f_j / sqrt(d_j))^2
double bg_objective(const BipartiteGraph& g, const std::map<std::size_t, double>& observed,
                    double fit_weight, const std::vector<double>& f);

/// Gauss-Seidel coordinate minimisation of bg_objective. Components without
/// an observed node receive the global observed mean.
BgResult bg_fit(const BipartiteGraph& g, const std::map<std::size_t, double>& observed,
                const BgConfig& cfg = {});

// ------------------------------------------- temporal matrix factorisation

struct TmfConfig {
  std::size_t rank = 4;
  double lambda_u = 0.05;
  double lambda_v = 0.05;
  double learning_rate = 0.01;
  std::size_t epochs = 40;
  std::uint64_t seed = 0;
};

/// R(u, v, t) ~ user_bias(u, t) + post_bias(v, t) + U_u . V_v
struct TMFModel {
  Eigen::MatrixXd user_factors;  // users x k
  Eigen::MatrixXd post_factors;  // k x posts
  Eigen::MatrixXd user_bias;     // users x time bins
  Eigen::MatrixXd post_bias;     // posts x time bins
  double lambda_u = 0.0;
  double lambda_v = 0.0;
  std::vector<double> loss_history;  // objective before training, then per epoch

  double predict(std::size_t u, std::size_t v, std::size_t t) const;
};

/// Squared error over observed entries plus ridge terms.
double tmf_objective(const TMFModel& m, const PTensor& r);

struct TmfGradient {
  Eigen::MatrixXd user_factors, post_factors, user_bias, post_bias;
};
TmfGradient tmf_gradient(const TMFModel& m, const PTensor& r);

TMFModel tmf_init(const Dims& dims, const TmfConfig& cfg);
TMFModel tmf_fit(const PTensor& r, const TmfConfig& cfg);
double tmf_predict(const TMFModel& m, std::size_t u, std::size_t v, std::size_t t);

}  // namespace mtpop
