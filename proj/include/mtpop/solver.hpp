#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mtpop/multiscale.hpp"
#include "mtpop/tensor.hpp"

namespace mtpop {

enum class LambdaMode {
  paper_rule,  // sqrt(m*n) + sqrt(t) on the (m*n) x t unfolding
  scaled,      // lambda_scale * paper_rule
};

struct SolverConfig {
  std::size_t max_iter = 100;
  double tol = 1e-4;
  LambdaMode lambda_mode = LambdaMode::paper_rule;
  double lambda_scale = 1.0;
  bool correlation_select = true;
  /// Start Z_i from seeded uniform(-0.01, 0.01) noise instead of zero.
  bool random_init = false;
  std::uint64_t seed = 0;
  /// Worker threads for per-block SVT; 0 means hardware concurrency.
  std::size_t threads = 1;
  /// Receives one `iter=<k> residual=<r> active=<bits>` line per iteration.
  std::function<void(const std::string&)> log;

  void validate() const;
};

/// Thin SVD triplet: input == left * diag(singulars) * right^T.
struct SVTFactors {
  Eigen::MatrixXd left;
  Eigen::VectorXd singulars;  // non-negative, non-increasing
  Eigen::MatrixXd right;
};

SVTFactors svd_factors(const Eigen::MatrixXd& m);

/// Sum of singular values.
double nuclear_norm(const Eigen::MatrixXd& m);

/// Proximal operator of lambda * nuclear norm: left * max(S - lambda, 0) * right^T.
Eigen::MatrixXd svt(const Eigen::MatrixXd& m, double lambda);

/// Threshold for a block with the given extents under `cfg`.
double block_lambda(const Index3& extents, const SolverConfig& cfg);

struct BlockwiseResult {
  PTensor tensor;
  /// Per layout block: true when thresholding left it at rank zero.
  std::vector<bool> dropped;
  std::size_t kept_blocks() const;
};

/// Thresholds the time unfolding of every block of `layout` independently
/// and re-assembles the blocks. The mask of the input is carried over.
BlockwiseResult blockwise_svt(const PTensor& tensor, const CULayout& layout,
                              const SolverConfig& cfg);

struct SolverState {
  std::vector<PTensor> scale_estimates;   // R_i
  std::vector<PTensor> scale_components;  // Z_i
  std::vector<bool> active;
  std::size_t iter = 0;
  double last_residual = 0.0;
  std::vector<double> residual_history;
  bool converged = false;
};

struct FitResult {
  PTensor completed;
  SolverState state;
};

/// Joint low-rank reconstruction of the observed tensor over several time
/// scales, one CU layout per scale. Observed entries of the result equal
/// their known values.
FitResult admm_fit(const PTensor& observed, const std::vector<CULayout>& layouts,
                   const SolverConfig& cfg);

/// Observed-entry relative residual ||P(R - sum Z_active)|| / ||P(R)||.
double observed_residual(const PTensor& observed, const std::vector<PTensor>& components,
                         const std::vector<bool>& active);

std::vector<double> predict(const PTensor& completed, const std::vector<Index3>& queries);

}  // namespace mtpop
