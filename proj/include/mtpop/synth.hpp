#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtpop/multiscale.hpp"
#include "mtpop/popularity.hpp"
#include "mtpop/rearrange.hpp"
#include "mtpop/tensor.hpp"

namespace mtpop {

struct SynthScale {
  std::string name;
  std::size_t window_bins = 7;
  std::size_t block_rank = 2;
  double amplitude = 1.0;
};

struct SynthConfig {
  Dims dims{64, 64, 182};
  std::vector<SynthScale> scales{{"week", 7, 2, 1.0}, {"month", 30, 2, 1.0}, {"season", 91, 2, 1.0}};
  double noise_sigma = 0.1;
  double observe_frac = 0.5;
  std::size_t user_clusters = 4;
  std::size_t post_clusters = 4;
  std::size_t user_feature_dims = 5;
  std::size_t post_feature_dims = 8;
  /// Offset of every popularity value; keeps view counts well above one.
  double base_popularity = 10.0;
  /// Per-cluster popularity offsets are drawn from N(0, cluster_offset^2).
  double cluster_offset = 0.0;
  double feature_jitter = 0.1;
  double bin_width_days = 1.0;
  std::int64_t time_origin = 1420070400;  // 2015-01-01T00:00:00Z
  std::uint64_t seed = 0;

  /// Throws ConfigError on empty dims, observe_frac outside (0, 1], negative
  /// noise, a bad cluster count or an empty scale list.
  void validate() const;
};

struct SynthData {
  /// Noisy values, every entry observed. Emitted (shuffled) axis order.
  PTensor ground_truth;
  /// ground_truth restricted to the sampled mask.
  PTensor observed;
  ContextFeatures features;
  /// One record per observed cell.
  Dataset dataset;
  /// One record per unobserved cell, on the same time origin.
  Dataset held_out;
  /// Planted cluster of each emitted user / post index.
  std::vector<std::size_t> user_cluster;
  std::vector<std::size_t> post_cluster;
  /// Emitted index at each planted position; users of a cluster are
  /// contiguous in planted order.
  std::vector<std::size_t> planted_user_order;
  std::vector<std::size_t> planted_post_order;
  /// Block layouts used for the planted components, in planted order.
  std::vector<CULayout> layouts;
};

/// Sum over scales of blockwise rank-r components whose time factors repeat
/// with the scale's window, plus Gaussian noise. Blocks follow plan_layout
/// with the planted cluster sizes as group sizes. Throws ConfigError when a
/// block_rank exceeds the rank bound min(m * n, t) of some block.
SynthData generate(const SynthConfig& cfg);

/// The noiseless planted component of one scale, planted axis order.
PTensor planted_component(const SynthConfig& cfg, std::size_t scale_index);

/// `user_id,post_id,time_bin,value,observed` rows for every cell.
void write_ground_truth(const SynthData& data, std::ostream& out);

}  // namespace mtpop
