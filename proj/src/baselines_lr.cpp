#include <fmt/format.h>

#include "mtpop/baselines.hpp"
#include "mtpop/error.hpp"

namespace mtpop {

double LinearModel::predict(const Eigen::VectorXd& x) const {
  const Eigen::Index p = x.size();
  double y = weights.head(p).dot(x);
  if (intercept) y += weights(p);
  return y;
}

LinearModel lr_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge,
                   bool intercept) {
  if (x.rows() != y.size()) {
    throw ConfigError(fmt::format("lr_fit: {} rows but {} targets", x.rows(), y.size()));
  }
  if (x.rows() == 0) throw ConfigError("lr_fit: no samples");
  if (!(ridge >= 0.0)) throw ConfigError("lr_fit: ridge must be non-negative");
  if (!x.allFinite() || !y.allFinite()) throw NumericError("lr_fit: non-finite input");

  const Eigen::Index p = x.cols();
  const Eigen::Index q = intercept ? p + 1 : p;
  Eigen::MatrixXd design(x.rows(), q);
  design.leftCols(p) = x;
  if (intercept) design.col(p).setOnes();

  Eigen::MatrixXd normal = design.transpose() * design;
  normal.diagonal().head(p).array() += ridge;
  const Eigen::VectorXd rhs = design.transpose() * y;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(normal);
  if (qr.rank() < q) {
    throw NumericError(fmt::format(
        "lr_fit: normal equations are singular (rank {} of {}); use ridge > 0", qr.rank(), q));
  }
  return {qr.solve(rhs), intercept};
}

Eigen::VectorXd lr_predict(const LinearModel& model, const Eigen::MatrixXd& x) {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = model.predict(x.row(i).transpose());
  return out;
}

}  // namespace mtpop
