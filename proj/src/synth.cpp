#include "mtpop/synth.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <ostream>

#include <fmt/format.h>

#include "mtpop/error.hpp"
#include "mtpop/random.hpp"

namespace mtpop {

namespace {

// Independent stream per purpose so that each part of the output can be
// regenerated on its own.
Rng stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index)};
  return Rng(seq);
}

enum Purpose : std::uint64_t { kScale = 1, kNoise, kMask, kShuffle, kFeatures, kRecords, kOffset };

// Planted cluster of each planted position; clusters are contiguous and
// differ in size by at most one.
std::vector<std::size_t> contiguous_clusters(std::size_t n, std::size_t k) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i * k / n;
  return out;
}

std::size_t id_width(std::size_t n) { return fmt::format("{}", n > 0 ? n - 1 : 0).size(); }

CULayout planted_layout(const SynthConfig& cfg, std::size_t i) {
  const auto& s = cfg.scales[i];
  return plan_layout(cfg.dims, {s.name, s.window_bins}, cfg.dims.user / cfg.user_clusters,
                     cfg.dims.post / cfg.post_clusters);
}

PTensor make_component(const SynthConfig& cfg, std::size_t i, const CULayout& layout) {
  const auto& s = cfg.scales[i];
  const std::size_t r = s.block_rank;
  for (const auto& b : layout.blocks) {
    if (r > std::min(b.extents.user * b.extents.post, b.extents.time)) {
      throw ConfigError(fmt::format(
          "scale '{}': rank {} exceeds the {}x{}x{} block at ({}, {}, {})", s.name, r,
          b.extents.user, b.extents.post, b.extents.time, b.location.user, b.location.post,
          b.location.time));
    }
  }
  Rng rng = stream(cfg.seed, kScale, i);
  const Dims& d = cfg.dims;
  const std::size_t m = layout.block_shape.user, n = layout.block_shape.post;
  const std::size_t ub = (d.user + m - 1) / m, pb = (d.post + n - 1) / n;
  // Periodic time factors per (user block, post block): r x window.
  std::vector<Eigen::MatrixXd> factors(ub * pb);
  for (auto& f : factors) {
    f.resize(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s.window_bins));
    for (Eigen::Index a = 0; a < f.size(); ++a) f.data()[a] = standard_normal(rng);
  }
  const double gain = s.amplitude / std::sqrt(static_cast<double>(r));
  PTensor out(d);
  std::vector<double> loading(r);
  for (const auto& b : layout.blocks) {
    const auto& f = factors[(b.location.user / m) * pb + b.location.post / n];
    for (std::size_t u = b.location.user; u < b.location.user + b.extents.user; ++u) {
      for (std::size_t v = b.location.post; v < b.location.post + b.extents.post; ++v) {
        for (auto& x : loading) x = standard_normal(rng);
        for (std::size_t t = b.location.time; t < b.location.time + b.extents.time; ++t) {
          const auto col = static_cast<Eigen::Index>(t % s.window_bins);
          double value = 0;
          for (std::size_t k = 0; k < r; ++k) value += loading[k] * f(static_cast<Eigen::Index>(k), col);
          out.values()[out.offset(u, v, t)] = gain * value;
        }
      }
    }
  }
  return out;
}

std::vector<FeatureVector> cluster_features(Rng& rng, const std::vector<std::size_t>& cluster,
                                            std::size_t clusters, std::size_t dims,
                                            double jitter) {
  std::vector<FeatureVector> centres(clusters, FeatureVector(dims));
  for (auto& c : centres) {
    for (auto& x : c) x = standard_normal(rng);
  }
  std::vector<FeatureVector> out(cluster.size(), FeatureVector(dims));
  for (std::size_t i = 0; i < cluster.size(); ++i) {
    for (std::size_t k = 0; k < dims; ++k) {
      out[i][k] = centres[cluster[i]][k] + jitter * standard_normal(rng);
    }
  }
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (dims.user < 1 || dims.post < 1 || dims.time < 1) {
    throw ConfigError(fmt::format("synthetic dims {}x{}x{} must all be positive", dims.user,
                                  dims.post, dims.time));
  }
  if (!(observe_frac > 0.0 && observe_frac <= 1.0)) {
    throw ConfigError(fmt::format("observe_frac {} is outside (0, 1]", observe_frac));
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be non-negative");
  if (!(cluster_offset >= 0.0) || !(feature_jitter >= 0.0)) {
    throw ConfigError("cluster_offset and feature_jitter must be non-negative");
  }
  if (user_clusters < 1 || user_clusters > dims.user) {
    throw ConfigError(fmt::format("user_clusters {} is outside [1, {}]", user_clusters, dims.user));
  }
  if (post_clusters < 1 || post_clusters > dims.post) {
    throw ConfigError(fmt::format("post_clusters {} is outside [1, {}]", post_clusters, dims.post));
  }
  if (user_feature_dims < 1 || post_feature_dims < 1) {
    throw ConfigError("feature dimensions must be positive");
  }
  if (!(bin_width_days > 0.0)) throw ConfigError("bin_width_days must be positive");
  if (scales.empty()) throw ConfigError("synthetic config needs at least one scale");
  for (const auto& s : scales) {
    if (s.window_bins < 1 || s.window_bins > dims.time) {
      throw ConfigError(fmt::format("scale '{}' window {} is outside [1, {}]", s.name,
                                    s.window_bins, dims.time));
    }
    if (s.block_rank < 1) throw ConfigError(fmt::format("scale '{}' needs rank >= 1", s.name));
  }
}

PTensor planted_component(const SynthConfig& cfg, std::size_t scale_index) {
  cfg.validate();
  if (scale_index >= cfg.scales.size()) {
    throw IndexError(fmt::format("scale index {} out of range", scale_index));
  }
  return make_component(cfg, scale_index, planted_layout(cfg, scale_index));
}

SynthData generate(const SynthConfig& cfg) {
  cfg.validate();
  const Dims& d = cfg.dims;
  SynthData out{PTensor(d), PTensor(d), {}, {}, {}, {}, {}, {}, {}, {}};

  // Planted arrangement.
  PTensor planted(d);
  for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
    out.layouts.push_back(planted_layout(cfg, i));
    planted = add(planted, make_component(cfg, i, out.layouts.back()));
  }
  const auto user_cluster = contiguous_clusters(d.user, cfg.user_clusters);
  const auto post_cluster = contiguous_clusters(d.post, cfg.post_clusters);
  {
    Rng rng = stream(cfg.seed, kOffset);
    std::vector<double> uo(cfg.user_clusters), po(cfg.post_clusters);
    for (auto& x : uo) x = cfg.cluster_offset * standard_normal(rng);
    for (auto& x : po) x = cfg.cluster_offset * standard_normal(rng);
    Rng noise = stream(cfg.seed, kNoise);
    for (std::size_t u = 0; u < d.user; ++u) {
      for (std::size_t v = 0; v < d.post; ++v) {
        for (std::size_t t = 0; t < d.time; ++t) {
          auto& x = planted.values()[planted.offset(u, v, t)];
          x += cfg.base_popularity + uo[user_cluster[u]] + po[post_cluster[v]];
          if (cfg.noise_sigma > 0) x += cfg.noise_sigma * standard_normal(noise);
        }
      }
    }
  }

  // Emission order.
  {
    Rng rng = stream(cfg.seed, kShuffle);
    out.planted_user_order = random_permutation(d.user, rng);
    out.planted_post_order = random_permutation(d.post, rng);
  }
  const auto user_pos = inverse_permutation(out.planted_user_order);
  const auto post_pos = inverse_permutation(out.planted_post_order);
  out.user_cluster.resize(d.user);
  out.post_cluster.resize(d.post);
  for (std::size_t e = 0; e < d.user; ++e) out.user_cluster[e] = user_cluster[user_pos[e]];
  for (std::size_t e = 0; e < d.post; ++e) out.post_cluster[e] = post_cluster[post_pos[e]];

  Rng mask_rng = stream(cfg.seed, kMask);
  for (std::size_t u = 0; u < d.user; ++u) {
    for (std::size_t v = 0; v < d.post; ++v) {
      for (std::size_t t = 0; t < d.time; ++t) {
        const double x = planted.values()[planted.offset(user_pos[u], post_pos[v], t)];
        out.ground_truth.set_observed(u, v, t, x);
        if (cfg.observe_frac >= 1.0 || uniform_unit(mask_rng) < cfg.observe_frac) {
          out.observed.set_observed(u, v, t, x);
        }
      }
    }
  }

  Rng feature_rng = stream(cfg.seed, kFeatures);
  const auto uf = cluster_features(feature_rng, out.user_cluster, cfg.user_clusters,
                                   cfg.user_feature_dims, cfg.feature_jitter);
  const auto pf = cluster_features(feature_rng, out.post_cluster, cfg.post_clusters,
                                   cfg.post_feature_dims, cfg.feature_jitter);
  for (std::size_t u = 0; u < d.user; ++u) out.features.user_features[u] = uf[u];
  for (std::size_t v = 0; v < d.post; ++v) out.features.post_features[v] = pf[v];

  const auto bin_seconds =
      static_cast<std::int64_t>(std::llround(cfg.bin_width_days * static_cast<double>(kSecondsPerDay)));
  const std::size_t uw = id_width(d.user), pw = id_width(d.post);
  out.dataset.time_origin = out.held_out.time_origin = cfg.time_origin;
  out.dataset.bin_width_days = out.held_out.bin_width_days = cfg.bin_width_days;
  Rng record_rng = stream(cfg.seed, kRecords);
  for (std::size_t u = 0; u < d.user; ++u) {
    for (std::size_t v = 0; v < d.post; ++v) {
      for (std::size_t t = 0; t < d.time; ++t) {
        PopularityRecord rec;
        rec.user_id = fmt::format("u{:0{}}", u, uw);
        rec.post_id = fmt::format("p{:0{}}", v, pw);
        rec.share_time = cfg.time_origin + static_cast<std::int64_t>(t) * bin_seconds +
                         static_cast<std::int64_t>(
                             uniform_index(record_rng, static_cast<std::size_t>(bin_seconds)));
        rec.age_days = static_cast<double>(1 + uniform_index(record_rng, 30));
        const double s = out.ground_truth.at(u, v, t);
        const double views = std::round(rec.age_days * std::exp2(s - 1.0));
        rec.views = views < 1.0 ? 1 : static_cast<std::uint64_t>(views);
        rec.user_features = uf[u];
        rec.post_features = pf[v];
        (out.observed.observed(u, v, t) ? out.dataset : out.held_out).records.push_back(std::move(rec));
      }
    }
  }
  // Share time of a post: its earliest observed sharing event.
  for (const auto* ds : {&out.dataset, &out.held_out}) {
    for (const auto& rec : ds->records) {
      const std::size_t v = std::stoul(rec.post_id.substr(1));
      auto [it, inserted] = out.features.share_time.emplace(v, rec.share_time);
      if (!inserted && ds == &out.dataset) it->second = std::min(it->second, rec.share_time);
    }
  }
  return out;
}

void write_ground_truth(const SynthData& data, std::ostream& out) {
  const Dims& d = data.ground_truth.dims();
  const std::size_t uw = id_width(d.user), pw = id_width(d.post);
  out << "user_id,post_id,time_bin,value,observed\n";
  for (std::size_t u = 0; u < d.user; ++u) {
    for (std::size_t v = 0; v < d.post; ++v) {
      for (std::size_t t = 0; t < d.time; ++t) {
        out << fmt::format("u{:0{}},p{:0{}},{},{},{}\n", u, uw, v, pw, t,
                           data.ground_truth.at(u, v, t), data.observed.observed(u, v, t) ? 1 : 0);
      }
    }
  }
}

}  // namespace mtpop
