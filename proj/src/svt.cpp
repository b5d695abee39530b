#include <cmath>

#include <Eigen/SVD>
#include <fmt/format.h>

#include "mtpop/error.hpp"
#include "mtpop/solver.hpp"
#include "parallel.hpp"

namespace mtpop {

namespace {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw NumericError(fmt::format("{}: matrix has non-finite entries", what));
}

// Soft-thresholds the singular values of `x` in place and returns the number
// of singular values that survive. Tall operands go through the eigenvalues
// of the small Gram matrix x^T x, which is exact for every singular value
// above the threshold and much cheaper than a full SVD.
Eigen::Index shrink_in_place(Eigen::Ref<RowMatrix> x, double lambda) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index cols = x.cols();
  if (rows >= 4 * cols && cols >= 16) {
    const Eigen::MatrixXd gram = x.transpose() * x;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const Eigen::VectorXd& mu = eig.eigenvalues();  // ascending
    Eigen::Index first = cols;
    Eigen::VectorXd weight(cols);
    for (Eigen::Index k = cols - 1; k >= 0; --k) {
      const double sigma = std::sqrt(std::max(mu(k), 0.0));
      if (sigma > lambda) {
        first = k;
        weight(k) = 1.0 - lambda / sigma;
      } else {
        break;
      }
    }
    const Eigen::Index kept = cols - first;
    if (kept == 0) {
      x.setZero();
      return 0;
    }
    const Eigen::MatrixXd v = eig.eigenvectors().rightCols(kept);
    const Eigen::MatrixXd proj = v * weight.tail(kept).asDiagonal() * v.transpose();
    const RowMatrix shrunk = x * proj;
    x = shrunk;
    return kept;
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  Eigen::Index kept = 0;
  while (kept < s.size() && s(kept) > lambda) ++kept;
  if (kept == 0) {
    x.setZero();
    return 0;
  }
  const Eigen::VectorXd shrunk = s.head(kept).array() - lambda;
  x.noalias() = svd.matrixU().leftCols(kept) * shrunk.asDiagonal() *
                svd.matrixV().leftCols(kept).transpose();
  return kept;
}

}  // namespace

void SolverConfig::validate() const {
  if (max_iter < 1) throw ConfigError("solver max_iter must be at least 1");
  if (!(tol > 0.0)) throw ConfigError("solver tol must be positive");
  if (!(lambda_scale > 0.0) || !std::isfinite(lambda_scale)) {
    throw ConfigError("solver lambda_scale must be a positive finite number");
  }
}

SVTFactors svd_factors(const Eigen::MatrixXd& m) {
  require_finite(m, "svd");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

double nuclear_norm(const Eigen::MatrixXd& m) {
  require_finite(m, "nuclear_norm");
  if (m.size() == 0) return 0.0;
  return Eigen::BDCSVD<Eigen::MatrixXd>(m).singularValues().sum();
}

Eigen::MatrixXd svt(const Eigen::MatrixXd& m, double lambda) {
  require_finite(m, "svt");
  if (!(lambda > 0.0)) throw ConfigError(fmt::format("svt threshold must be positive, got {}", lambda));
  const SVTFactors f = svd_factors(m);
  const Eigen::VectorXd shrunk = (f.singulars.array() - lambda).max(0.0);
  return f.left * shrunk.asDiagonal() * f.right.transpose();
}

double block_lambda(const Index3& extents, const SolverConfig& cfg) {
  const double rule = std::sqrt(static_cast<double>(extents.user * extents.post)) +
                      std::sqrt(static_cast<double>(extents.time));
  return cfg.lambda_mode == LambdaMode::scaled ? cfg.lambda_scale * rule : rule;
}

std::size_t BlockwiseResult::kept_blocks() const {
  std::size_t n = 0;
  for (bool d : dropped) n += !d;
  return n;
}

BlockwiseResult blockwise_svt(const PTensor& tensor, const CULayout& layout,
                              const SolverConfig& cfg) {
  if (!(tensor.dims() == layout.dims)) {
    throw ConfigError("layout was planned for different tensor dims");
  }
  BlockwiseResult result{tensor, std::vector<bool>(layout.blocks.size(), false)};
  std::vector<std::uint8_t> dropped(layout.blocks.size(), 0);
  auto& out = result.tensor.values();
  const Dims& dims = tensor.dims();

  detail::parallel_for(layout.blocks.size(), cfg.threads, [&](std::size_t j) {
    const BlockSpec& b = layout.blocks[j];
    CUBlock block = extract_block(tensor, b.location, b.extents);
    Eigen::Map<RowMatrix> unfolded(block.data.data(),
                                   static_cast<Eigen::Index>(b.extents.user * b.extents.post),
                                   static_cast<Eigen::Index>(b.extents.time));
    require_finite(unfolded, "blockwise_svt");
    const Eigen::Index rank = shrink_in_place(unfolded, block_lambda(b.extents, cfg));
    dropped[j] = rank == 0;
    // Blocks are disjoint, so concurrent writes never overlap.
    std::size_t k = 0;
    for (std::size_t u = 0; u < b.extents.user; ++u) {
      for (std::size_t v = 0; v < b.extents.post; ++v) {
        const std::size_t base =
            ((b.location.user + u) * dims.post + b.location.post + v) * dims.time + b.location.time;
        for (std::size_t t = 0; t < b.extents.time; ++t) out[base + t] = block.data[k++];
      }
    }
  });
  for (std::size_t j = 0; j < dropped.size(); ++j) result.dropped[j] = dropped[j] != 0;
  return result;
}

}  // namespace mtpop
