#include <cmath>

#include <fmt/format.h>

#include "mtpop/baselines.hpp"
#include "mtpop/error.hpp"
#include "mtpop/random.hpp"

namespace mtpop {

double TMFModel::predict(std::size_t u, std::size_t v, std::size_t t) const {
  return user_bias(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(t)) +
         post_bias(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(t)) +
         user_factors.row(static_cast<Eigen::Index>(u)).dot(
             post_factors.col(static_cast<Eigen::Index>(v)));
}

double tmf_predict(const TMFModel& m, std::size_t u, std::size_t v, std::size_t t) {
  if (static_cast<Eigen::Index>(u) >= m.user_factors.rows() ||
      static_cast<Eigen::Index>(v) >= m.post_factors.cols() ||
      static_cast<Eigen::Index>(t) >= m.user_bias.cols()) {
    throw IndexError(fmt::format("tmf_predict: ({}, {}, {}) outside the model", u, v, t));
  }
  return m.predict(u, v, t);
}

double tmf_objective(const TMFModel& m, const PTensor& r) {
  const Dims& d = r.dims();
  double loss = 0;
  for (std::size_t u = 0; u < d.user; ++u) {
    for (std::size_t v = 0; v < d.post; ++v) {
      for (std::size_t t = 0; t < d.time; ++t) {
        const std::size_t k = r.offset(u, v, t);
        if (!r.mask()[k]) continue;
        const double e = r.values()[k] - m.predict(u, v, t);
        loss += e * e;
      }
    }
  }
  loss += m.lambda_u * (m.user_factors.squaredNorm() + m.user_bias.squaredNorm());
  loss += m.lambda_v * (m.post_factors.squaredNorm() + m.post_bias.squaredNorm());
  return loss;
}

TmfGradient tmf_gradient(const TMFModel& m, const PTensor& r) {
  TmfGradient g{2.0 * m.lambda_u * m.user_factors, 2.0 * m.lambda_v * m.post_factors,
                2.0 * m.lambda_u * m.user_bias, 2.0 * m.lambda_v * m.post_bias};
  const Dims& d = r.dims();
  for (std::size_t u = 0; u < d.user; ++u) {
    for (std::size_t v = 0; v < d.post; ++v) {
      for (std::size_t t = 0; t < d.time; ++t) {
        const std::size_t k = r.offset(u, v, t);
        if (!r.mask()[k]) continue;
        const auto ui = static_cast<Eigen::Index>(u), vi = static_cast<Eigen::Index>(v),
                   ti = static_cast<Eigen::Index>(t);
        const double e = r.values()[k] - m.predict(u, v, t);
        g.user_factors.row(ui) -= 2.0 * e * m.post_factors.col(vi).transpose();
        g.post_factors.col(vi) -= 2.0 * e * m.user_factors.row(ui).transpose();
        g.user_bias(ui, ti) -= 2.0 * e;
        g.post_bias(vi, ti) -= 2.0 * e;
      }
    }
  }
  return g;
}

TMFModel tmf_init(const Dims& dims, const TmfConfig& cfg) {
  if (cfg.rank < 1) throw ConfigError("tmf rank must be at least 1");
  if (cfg.lambda_u < 0 || cfg.lambda_v < 0) throw ConfigError("tmf regularisers must be >= 0");
  Rng rng(cfg.seed);
  const auto k = static_cast<Eigen::Index>(cfg.rank);
  TMFModel m;
  m.lambda_u = cfg.lambda_u;
  m.lambda_v = cfg.lambda_v;
  m.user_factors.resize(static_cast<Eigen::Index>(dims.user), k);
  m.post_factors.resize(k, static_cast<Eigen::Index>(dims.post));
  for (Eigen::Index i = 0; i < m.user_factors.size(); ++i) {
    m.user_factors.data()[i] = 0.1 * standard_normal(rng);
  }
  for (Eigen::Index i = 0; i < m.post_factors.size(); ++i) {
    m.post_factors.data()[i] = 0.1 * standard_normal(rng);
  }
  m.user_bias = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dims.user),
                                      static_cast<Eigen::Index>(dims.time));
  m.post_bias = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dims.post),
                                      static_cast<Eigen::Index>(dims.time));
  return m;
}

TMFModel tmf_fit(const PTensor& r, const TmfConfig& cfg) {
  const Dims& d = r.dims();
  std::vector<Index3> entries;
  for (std::size_t u = 0; u < d.user; ++u) {
    for (std::size_t v = 0; v < d.post; ++v) {
      for (std::size_t t = 0; t < d.time; ++t) {
        if (r.mask()[r.offset(u, v, t)]) entries.push_back({u, v, t});
      }
    }
  }
  if (entries.size() < cfg.rank) {
    throw ConfigError(fmt::format("tmf needs at least {} observed entries, got {}", cfg.rank,
                                  entries.size()));
  }
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("tmf learning rate must be positive");

  TMFModel m = tmf_init(d, cfg);
  Rng rng(cfg.seed + 1);

  // Each sample carries the share of the ridge penalty of the rows it
  // touches, so one epoch sums to the full-batch gradient.
  Eigen::VectorXd user_n = Eigen::VectorXd::Zero(m.user_factors.rows());
  Eigen::VectorXd post_n = Eigen::VectorXd::Zero(m.post_factors.cols());
  Eigen::MatrixXd user_t = Eigen::MatrixXd::Zero(m.user_bias.rows(), m.user_bias.cols());
  Eigen::MatrixXd post_t = Eigen::MatrixXd::Zero(m.post_bias.rows(), m.post_bias.cols());
  for (const auto& e : entries) {
    const auto u = static_cast<Eigen::Index>(e.user), v = static_cast<Eigen::Index>(e.post),
               t = static_cast<Eigen::Index>(e.time);
    user_n(u) += 1;
    post_n(v) += 1;
    user_t(u, t) += 1;
    post_t(v, t) += 1;
  }

  m.loss_history.push_back(tmf_objective(m, r));
  const double lr = cfg.learning_rate;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(entries, rng);
    for (const auto& e : entries) {
      const auto u = static_cast<Eigen::Index>(e.user), v = static_cast<Eigen::Index>(e.post),
                 t = static_cast<Eigen::Index>(e.time);
      const double err = r.values()[r.offset(e.user, e.post, e.time)] - m.predict(e.user, e.post, e.time);
      const Eigen::RowVectorXd uu = m.user_factors.row(u);
      m.user_factors.row(u) -= lr * (-2.0 * err * m.post_factors.col(v).transpose() +
                                     2.0 * m.lambda_u / user_n(u) * uu);
      m.post_factors.col(v) -= lr * (-2.0 * err * uu.transpose() +
                                     2.0 * m.lambda_v / post_n(v) * m.post_factors.col(v));
      m.user_bias(u, t) -= lr * (-2.0 * err + 2.0 * m.lambda_u / user_t(u, t) * m.user_bias(u, t));
      m.post_bias(v, t) -= lr * (-2.0 * err + 2.0 * m.lambda_v / post_t(v, t) * m.post_bias(v, t));
    }
    const double loss = tmf_objective(m, r);
    if (!std::isfinite(loss)) {
      throw NumericError(fmt::format(
          "tmf loss became non-finite in epoch {}; lower the learning rate", epoch + 1));
    }
    m.loss_history.push_back(loss);
  }
  return m;
}

}  // namespace mtpop
