#include <map>
#include <unordered_map>

#include <fmt/format.h>

#include "mtpop/error.hpp"
#include "mtpop/eval.hpp"

namespace mtpop {

MtPipelineResult mt_complete(const PTensor& observed, const ContextFeatures& features,
                             const MtConfig& cfg, double bin_width_days, std::uint64_t seed) {
  const Dims& dims = observed.dims();
  Rearrangement arrangement =
      cfg.rearrange
          ? build_rearrangement(features, dims.user, dims.post,
                                cfg.k_user ? cfg.k_user : default_cluster_count(dims.user),
                                cfg.k_post ? cfg.k_post : default_cluster_count(dims.post), seed)
          : Rearrangement::identity(dims.user, dims.post);
  PTensor arranged = apply(arrangement, observed);
  double offset = 0.0;
  if (cfg.center) {
    const std::size_t count = arranged.observed_count();
    for (std::size_t i = 0; i < arranged.size(); ++i) {
      if (arranged.mask()[i]) offset += arranged.values()[i];
    }
    offset = count ? offset / static_cast<double>(count) : 0.0;
    for (std::size_t i = 0; i < arranged.size(); ++i) {
      if (arranged.mask()[i]) arranged.values()[i] -= offset;
    }
  }

  ScalePlan plan = cfg.plan.scales.empty() ? default_scale_plan(bin_width_days) : cfg.plan;
  // Windows longer than the observed time range collapse onto it.
  for (auto& s : plan.scales) s.window_bins = std::min(s.window_bins, dims.time);
  plan.validate(dims.time);

  std::vector<CULayout> layouts;
  for (const auto& s : plan.scales) {
    layouts.push_back(plan_layout(dims, s, arrangement.min_user_group(),
                                  arrangement.min_post_group(), cfg.rounding));
  }
  SolverConfig solver = cfg.solver;
  solver.seed = seed;
  FitResult fit = admm_fit(arranged, layouts, solver);
  if (offset != 0.0) {
    for (auto& x : fit.completed.values()) x += offset;
  }
  return {invert(arrangement, fit.completed), std::move(arrangement), std::move(layouts),
          std::move(fit.state)};
}

namespace {

std::string plan_text(const ScalePlan& plan) {
  if (plan.scales.empty()) return "GT";
  std::string s;
  for (const auto& t : plan.scales) s += fmt::format("{}:{};", t.name, t.window_bins);
  return s;
}

std::vector<double> popularities(const Dataset& ds, std::span<const std::size_t> ids) {
  std::vector<double> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(ds.records[id].popularity());
  return out;
}

class MtMethod final : public Method {
 public:
  explicit MtMethod(MtConfig cfg) : cfg_(std::move(cfg)) {}
  std::string name() const override { return "mt"; }
  std::string describe() const override {
    const auto& s = cfg_.solver;
    return fmt::format("mt plan={} max_iter={} tol={} lambda_mode={} lambda_scale={} select={} "
                       "random_init={} rearrange={} k_user={} k_post={} rounding={} center={}",
                       plan_text(cfg_.plan), s.max_iter, s.tol,
                       s.lambda_mode == LambdaMode::paper_rule ? "paper_rule" : "scaled",
                       s.lambda_scale, s.correlation_select, s.random_init, cfg_.rearrange,
                       cfg_.k_user, cfg_.k_post,
                       cfg_.rounding == BlockRounding::base2 ? "base2" : "base_e", cfg_.center);
  }
  std::vector<double> predict(const FoldData& fold) const override {
    const PTensor train = build_tensor(fold.dataset, fold.index, fold.train);
    const auto result =
        mt_complete(train, fold.index.features, cfg_, fold.dataset.bin_width_days, fold.seed);
    std::vector<Index3> cells;
    cells.reserve(fold.test.size());
    for (auto id : fold.test) cells.push_back(fold.index.cells[id]);
    return mtpop::predict(result.completed, cells);
  }

 private:
  MtConfig cfg_;
};

class AvMethod final : public Method {
 public:
  explicit AvMethod(AvConfig cfg) : cfg_(cfg) {}
  std::string name() const override { return "av"; }
  std::string describe() const override {
    return fmt::format("av neighbours={} pool={}", cfg_.neighbours, cfg_.pool_size);
  }
  std::vector<double> predict(const FoldData& fold) const override {
    // One candidate per training photo: its mean popularity and latest share time.
    std::map<std::size_t, std::pair<double, std::size_t>> sums;
    std::map<std::size_t, std::int64_t> latest;
    for (auto id : fold.train) {
      const auto post = fold.index.cells[id].post;
      auto& [sum, n] = sums[post];
      sum += fold.dataset.records[id].popularity();
      ++n;
      const auto t = fold.dataset.records[id].share_time;
      auto [it, inserted] = latest.emplace(post, t);
      if (!inserted) it->second = std::max(it->second, t);
    }
    std::vector<AvCandidate> pool;
    for (const auto& [post, acc] : sums) {
      pool.push_back({fold.index.features.post_features.at(post), latest.at(post),
                      acc.first / static_cast<double>(acc.second)});
    }
    std::unordered_map<std::size_t, double> cache;
    std::vector<double> out;
    out.reserve(fold.test.size());
    for (auto id : fold.test) {
      const auto post = fold.index.cells[id].post;
      auto it = cache.find(post);
      if (it == cache.end()) {
        it = cache.emplace(post, av_predict(fold.index.features.post_features.at(post), pool, cfg_))
                 .first;
      }
      out.push_back(it->second);
    }
    return out;
  }

 private:
  AvConfig cfg_;
};

// User features, post features and the time bin as one regression row.
Eigen::MatrixXd design_rows(const FoldData& fold, std::span<const std::size_t> ids) {
  const auto& f = fold.index.features;
  const std::size_t p = f.user_features.begin()->second.size();
  const std::size_t q = f.post_features.begin()->second.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(p + q + 1));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Index3& c = fold.index.cells[ids[i]];
    const auto& uf = f.user_features.at(c.user);
    const auto& pf = f.post_features.at(c.post);
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t d = 0; d < p; ++d) x(row, static_cast<Eigen::Index>(d)) = uf[d];
    for (std::size_t d = 0; d < q; ++d) x(row, static_cast<Eigen::Index>(p + d)) = pf[d];
    x(row, static_cast<Eigen::Index>(p + q)) = static_cast<double>(c.time);
  }
  return x;
}

class LrMethod final : public Method {
 public:
  explicit LrMethod(double ridge) : ridge_(ridge) {}
  std::string name() const override { return "lr"; }
  std::string describe() const override { return fmt::format("lr ridge={}", ridge_); }
  std::vector<double> predict(const FoldData& fold) const override {
    const auto y = popularities(fold.dataset, fold.train);
    const LinearModel model =
        lr_fit(design_rows(fold, fold.train),
               Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())),
               ridge_);
    const Eigen::VectorXd pred = lr_predict(model, design_rows(fold, fold.test));
    return {pred.data(), pred.data() + pred.size()};
  }

 private:
  double ridge_;
};

class BgMethod final : public Method {
 public:
  explicit BgMethod(BgConfig cfg) : cfg_(cfg) {}
  std::string name() const override { return "bg"; }
  std::string describe() const override {
    return fmt::format("bg mu={} sweeps={} tol={}", cfg_.fit_weight, cfg_.max_sweeps, cfg_.tol);
  }
  std::vector<double> predict(const FoldData& fold) const override {
    // Sharing events are known for every record; only training popularity is.
    std::map<std::pair<std::size_t, std::size_t>, double> weights;
    for (const auto& c : fold.index.cells) weights[{c.user, c.post}] += 1.0;
    std::vector<BipartiteEdge> edges;
    edges.reserve(weights.size());
    for (const auto& [key, w] : weights) edges.push_back({key.first, key.second, w});
    const BipartiteGraph graph(fold.index.users.size(), fold.index.posts.size(), std::move(edges));

    std::map<std::size_t, std::pair<double, double>> acc;
    for (auto id : fold.train) {
      const auto& c = fold.index.cells[id];
      const double s = fold.dataset.records[id].popularity();
      for (auto node : {c.user, graph.post_node(c.post)}) {
        acc[node].first += s;
        acc[node].second += 1.0;
      }
    }
    std::map<std::size_t, double> observed;
    for (const auto& [node, a] : acc) observed[node] = a.first / a.second;
    const BgResult fit = bg_fit(graph, observed, cfg_);

    std::vector<double> out;
    out.reserve(fold.test.size());
    for (auto id : fold.test) out.push_back(fit.scores[graph.post_node(fold.index.cells[id].post)]);
    return out;
  }

 private:
  BgConfig cfg_;
};

class TmfMethod final : public Method {
 public:
  explicit TmfMethod(TmfConfig cfg) : cfg_(cfg) {}
  std::string name() const override { return "tmf"; }
  std::string describe() const override {
    return fmt::format("tmf k={} lambda_u={} lambda_v={} lr={} epochs={}", cfg_.rank,
                       cfg_.lambda_u, cfg_.lambda_v, cfg_.learning_rate, cfg_.epochs);
  }
  std::vector<double> predict(const FoldData& fold) const override {
    const PTensor train = build_tensor(fold.dataset, fold.index, fold.train);
    TmfConfig cfg = cfg_;
    cfg.seed = fold.seed;
    const TMFModel model = tmf_fit(train, cfg);
    std::vector<double> out;
    out.reserve(fold.test.size());
    for (auto id : fold.test) {
      const auto& c = fold.index.cells[id];
      out.push_back(model.predict(c.user, c.post, c.time));
    }
    return out;
  }

 private:
  TmfConfig cfg_;
};

}  // namespace

std::unique_ptr<Method> make_method(const std::string& name, const MethodConfig& cfg) {
  if (name == "mt") return std::make_unique<MtMethod>(cfg.mt);
  if (name == "av") return std::make_unique<AvMethod>(cfg.av);
  if (name == "lr") return std::make_unique<LrMethod>(cfg.lr_ridge);
  if (name == "bg") return std::make_unique<BgMethod>(cfg.bg);
  if (name == "tmf") return std::make_unique<TmfMethod>(cfg.tmf);
  throw ConfigError(fmt::format("unknown method '{}' (valid: mt, av, lr, bg, tmf)", name));
}

}  // namespace mtpop
