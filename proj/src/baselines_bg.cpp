#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mtpop/baselines.hpp"
#include "mtpop/error.hpp"

namespace mtpop {

BipartiteGraph::BipartiteGraph(std::size_t users, std::size_t posts,
                               std::vector<BipartiteEdge> edges)
    : users_(users), posts_(posts), edges_(std::move(edges)), degree_(users + posts, 0.0),
      adjacency_(users + posts) {
  for (const auto& e : edges_) {
    if (e.user >= users_ || e.post >= posts_) {
      throw IndexError(fmt::format("edge ({}, {}) outside a {}x{} bipartite graph", e.user, e.post,
                                   users_, posts_));
    }
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
      throw ConfigError(fmt::format("edge ({}, {}) has invalid weight {}", e.user, e.post, e.weight));
    }
    if (e.weight == 0.0) continue;
    const std::size_t a = e.user, b = post_node(e.post);
    degree_[a] += e.weight;
    degree_[b] += e.weight;
    adjacency_[a].emplace_back(b, e.weight);
    adjacency_[b].emplace_back(a, e.weight);
  }
}

double bg_objective(const BipartiteGraph& g, const std::map<std::size_t, double>& observed,
                    double fit_weight, const std::vector<double>& f) {
  double fit = 0;
  for (const auto& [node, s] : observed) fit += (f[node] - s) * (f[node] - s);
  double smooth = 0;
  for (const auto& e : g.edges()) {
    if (e.weight == 0.0) continue;
    const std::size_t a = e.user, b = g.post_node(e.post);
    const double diff = f[a] / std::sqrt(g.degree(a)) - f[b] / std::sqrt(g.degree(b));
    smooth += e.weight * diff * diff;
  }
  return fit_weight * fit + 0.5 * smooth;
}

BgResult bg_fit(const BipartiteGraph& g, const std::map<std::size_t, double>& observed,
                const BgConfig& cfg) {
  if (!(cfg.fit_weight > 0.0)) throw ConfigError("bg_fit: fit weight must be positive");
  bool any_edge = false;
  for (const auto& e : g.edges()) any_edge = any_edge || e.weight > 0.0;
  if (!any_edge) throw ConfigError("bg_fit: graph has no edge with positive weight");
  if (observed.empty()) throw ConfigError("bg_fit: no observed node scores");

  const std::size_t n = g.nodes();
  double mean = 0;
  for (const auto& [node, s] : observed) {
    if (node >= n) throw IndexError(fmt::format("observed node {} outside graph", node));
    mean += s;
  }
  mean /= static_cast<double>(observed.size());

  // Connected components; those without an observed node are pinned to the mean.
  std::vector<std::size_t> component(n, n);
  std::vector<bool> anchored;
  for (std::size_t start = 0; start < n; ++start) {
    if (component[start] != n) continue;
    const std::size_t id = anchored.size();
    bool has_obs = false;
    std::vector<std::size_t> stack{start};
    component[start] = id;
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      has_obs = has_obs || observed.count(x);
      for (const auto& [y, w] : g.neighbours(x)) {
        if (component[y] == n) {
          component[y] = id;
          stack.push_back(y);
        }
      }
    }
    anchored.push_back(has_obs);
  }

  BgResult result;
  result.scores.assign(n, mean);
  for (const auto& [node, s] : observed) result.scores[node] = s;
  auto& f = result.scores;
  result.objective_history.push_back(bg_objective(g, observed, cfg.fit_weight, f));

  for (std::size_t sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    double max_change = 0, max_abs = 0;
    for (std::size_t x = 0; x < n; ++x) {
      if (!anchored[component[x]]) continue;
      auto obs = observed.find(x);
      const double o = obs != observed.end() ? 2.0 * cfg.fit_weight : 0.0;
      const double target = obs != observed.end() ? obs->second : 0.0;
      double updated;
      if (g.degree(x) == 0.0) {
        updated = obs != observed.end() ? target : f[x];
      } else {
        double pull = 0;
        for (const auto& [y, w] : g.neighbours(x)) {
          pull += w * f[y] / std::sqrt(g.degree(x) * g.degree(y));
        }
        updated = (o * target + pull) / (o + 1.0);
      }
      max_change = std::max(max_change, std::abs(updated - f[x]));
      max_abs = std::max(max_abs, std::abs(updated));
      f[x] = updated;
    }
    result.objective_history.push_back(bg_objective(g, observed, cfg.fit_weight, f));
    result.sweeps = sweep + 1;
    if (max_change <= cfg.tol * std::max(max_abs, 1e-300)) break;
  }
  return result;
}

}  // namespace mtpop
