#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "mtpop/error.hpp"
#include "mtpop/random.hpp"
#include "mtpop/solver.hpp"

namespace mtpop {

namespace {

// Pearson correlation between `component` and the known values, over
// observed entries only. Undefined (constant input) maps to nullopt.
std::optional<double> observed_correlation(const PTensor& component, const PTensor& observed) {
  const auto& z = component.values();
  const auto& r = observed.values();
  const auto& mask = observed.mask();
  double n = 0, mz = 0, mr = 0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (!mask[k]) continue;
    n += 1;
    mz += z[k];
    mr += r[k];
  }
  if (n < 2) return std::nullopt;
  mz /= n;
  mr /= n;
  double szz = 0, srr = 0, szr = 0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (!mask[k]) continue;
    const double dz = z[k] - mz;
    const double dr = r[k] - mr;
    szz += dz * dz;
    srr += dr * dr;
    szr += dz * dr;
  }
  if (szz <= 0.0 || srr <= 0.0) return std::nullopt;
  return szr / std::sqrt(szz * srr);
}

std::vector<double> active_sum(const std::vector<PTensor>& components,
                               const std::vector<bool>& active, std::size_t size) {
  std::vector<double> sum(size, 0.0);
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (!active[i]) continue;
    const auto& z = components[i].values();
    for (std::size_t k = 0; k < size; ++k) sum[k] += z[k];
  }
  return sum;
}

std::string active_bits(const std::vector<bool>& active) {
  std::string bits;
  for (bool a : active) bits.push_back(a ? '1' : '0');
  return bits;
}

}  // namespace

double observed_residual(const PTensor& observed, const std::vector<PTensor>& components,
                         const std::vector<bool>& active) {
  const auto sum = active_sum(components, active, observed.size());
  const auto& r = observed.values();
  const auto& mask = observed.mask();
  double num = 0, den = 0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (!mask[k]) continue;
    const double d = r[k] - sum[k];
    num += d * d;
    den += r[k] * r[k];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

FitResult admm_fit(const PTensor& observed, const std::vector<CULayout>& layouts,
                   const SolverConfig& cfg) {
  cfg.validate();
  if (layouts.empty()) throw ConfigError("admm_fit needs at least one scale layout");
  for (const auto& layout : layouts) {
    if (!(layout.dims == observed.dims())) {
      throw ConfigError(fmt::format("layout for scale '{}' does not match tensor dims",
                                    layout.scale.name));
    }
  }
  if (observed.observed_count() == 0) throw ConfigError("admm_fit needs at least one observed entry");

  const std::size_t scales = layouts.size();
  const double inv_l = 1.0 / static_cast<double>(scales);
  const std::size_t size = observed.size();
  const auto& known = observed.values();
  const auto& mask = observed.mask();

  SolverState state;
  state.active.assign(scales, true);
  state.scale_estimates.assign(scales, PTensor(observed.dims()));
  state.scale_components.assign(scales, PTensor(observed.dims()));
  if (cfg.random_init) {
    Rng rng(cfg.seed);
    for (auto& z : state.scale_components) {
      for (auto& x : z.values()) x = uniform_real(rng, -0.01, 0.01);
    }
  }

  std::vector<double> delta(size);
  double previous = 0.0;
  for (std::size_t iter = 1; iter <= cfg.max_iter; ++iter) {
    const auto sum = active_sum(state.scale_components, state.active, size);
    for (std::size_t k = 0; k < size; ++k) delta[k] = mask[k] ? known[k] - sum[k] : 0.0;

    for (std::size_t i = 0; i < scales; ++i) {
      auto& estimate = state.scale_estimates[i];
      const auto& z = state.scale_components[i].values();
      auto& r = estimate.values();
      for (std::size_t k = 0; k < size; ++k) r[k] = z[k] + inv_l * delta[k];
      state.scale_components[i] = blockwise_svt(estimate, layouts[i], cfg).tensor;
    }

    if (cfg.correlation_select) {
      for (std::size_t i = 0; i < scales; ++i) {
        const auto corr = observed_correlation(state.scale_components[i], observed);
        state.active[i] = corr.has_value() && *corr > 0.0;
      }
    }

    const double residual = observed_residual(observed, state.scale_components, state.active);
    if (!std::isfinite(residual)) {
      throw NumericError(fmt::format("admm diverged at iteration {} (residual {})", iter, residual));
    }
    state.iter = iter;
    state.last_residual = residual;
    state.residual_history.push_back(residual);
    if (cfg.log) {
      cfg.log(fmt::format("iter={} residual={:.6g} active={}", iter, residual,
                          active_bits(state.active)));
    }
    if (iter > 1 && std::abs(residual - previous) < cfg.tol * std::max(previous, 1e-300)) {
      state.converged = true;
      break;
    }
    previous = residual;
  }

  PTensor completed(observed.dims());
  const auto sum = active_sum(state.scale_components, state.active, size);
  for (std::size_t k = 0; k < size; ++k) {
    completed.values()[k] = mask[k] ? known[k] : sum[k];
    completed.mask()[k] = mask[k];
  }
  return {std::move(completed), std::move(state)};
}

std::vector<double> predict(const PTensor& completed, const std::vector<Index3>& queries) {
  std::vector<double> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(completed.at(q.user, q.post, q.time));
  return out;
}

}  // namespace mtpop
