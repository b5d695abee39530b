#pragma once

#include <string>
#include <vector>

#include "mtpop/tensor.hpp"

namespace mtpop {

struct TimeScale {
  std::string name;
  std::size_t window_bins = 1;

  friend bool operator==(const TimeScale&, const TimeScale&) = default;
};

/// Ordered set of adopted time scales.
struct ScalePlan {
  std::vector<TimeScale> scales;

  std::size_t size() const { return scales.size(); }
  /// Throws ConfigError unless the plan is non-empty, names are unique and
  /// every window lies in [1, time_bins].
  void validate(std::size_t time_bins) const;
  /// Copy without the scale called `name`.
  ScalePlan without(const std::string& name) const;
  ScalePlan with(TimeScale extra) const;
};

/// General time scales (week, month, season) for a bin width in days.
ScalePlan default_scale_plan(double bin_width_days);

enum class BlockRounding { base2, base_e };

struct BlockSpec {
  Index3 location;
  Index3 extents;
};

/// Tiling of a tensor into CU blocks for one time scale. Blocks are listed
/// user-block major, then post-block, then time-block.
struct CULayout {
  TimeScale scale;
  Dims dims;
  Index3 block_shape;  // (m, n, t) of interior blocks
  std::vector<BlockSpec> blocks;

  std::size_t block_count() const { return blocks.size(); }
};

/// Chooses block dimensions for `scale` and tiles `dims` with them;
/// trailing blocks keep the remainder instead of being padded.
CULayout plan_layout(const Dims& dims, const TimeScale& scale, std::size_t min_user_group,
                     std::size_t min_post_group, BlockRounding rounding = BlockRounding::base2);

/// Splits `tensor` into the blocks of `layout`, in layout order.
std::vector<CUBlock> partition(const PTensor& tensor, const CULayout& layout);

}  // namespace mtpop
