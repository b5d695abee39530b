#include "mtpop/multiscale.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "mtpop/error.hpp"

namespace mtpop {

void ScalePlan::validate(std::size_t time_bins) const {
  if (scales.empty()) throw ConfigError("scale plan must contain at least one scale");
  std::set<std::string> names;
  for (const auto& s : scales) {
    if (!names.insert(s.name).second) {
      throw ConfigError(fmt::format("duplicate scale name '{}'", s.name));
    }
    if (s.window_bins < 1 || s.window_bins > time_bins) {
      throw ConfigError(fmt::format("scale '{}' window of {} bins is outside [1, {}]", s.name,
                                    s.window_bins, time_bins));
    }
  }
}

ScalePlan ScalePlan::without(const std::string& name) const {
  ScalePlan out;
  for (const auto& s : scales) {
    if (s.name != name) out.scales.push_back(s);
  }
  return out;
}

ScalePlan ScalePlan::with(TimeScale extra) const {
  ScalePlan out = *this;
  out.scales.push_back(std::move(extra));
  return out;
}

ScalePlan default_scale_plan(double bin_width_days) {
  if (!(bin_width_days > 0.0) || bin_width_days > 7.0) {
    throw ConfigError(fmt::format(
        "bin width of {} days does not fit at least one bin into a week", bin_width_days));
  }
  auto bins = [&](double days) {
    return static_cast<std::size_t>(std::max(1.0, std::round(days / bin_width_days)));
  };
  return ScalePlan{{{"week", bins(7)}, {"month", bins(30)}, {"season", bins(91)}}};
}

namespace {

std::size_t round_up(std::size_t x, BlockRounding rounding) {
  if (x <= 1) return 1;
  if (rounding == BlockRounding::base2) {
    std::size_t p = 1;
    while (p < x) p <<= 1;
    return p;
  }
  // smallest ceil(e^k) >= x
  for (int k = 1;; ++k) {
    const auto c = static_cast<std::size_t>(std::ceil(std::exp(static_cast<double>(k))));
    if (c >= x) return c;
  }
}

}  // namespace

CULayout plan_layout(const Dims& dims, const TimeScale& scale, std::size_t min_user_group,
                     std::size_t min_post_group, BlockRounding rounding) {
  if (scale.window_bins < 1 || scale.window_bins > dims.time) {
    throw ConfigError(fmt::format("scale '{}' window of {} bins is outside [1, {}]", scale.name,
                                  scale.window_bins, dims.time));
  }
  if (min_user_group < 1 || min_user_group > dims.user) {
    throw ConfigError(fmt::format("minimum user group {} is outside [1, {}]", min_user_group,
                                  dims.user));
  }
  if (min_post_group < 1 || min_post_group > dims.post) {
    throw ConfigError(fmt::format("minimum post group {} is outside [1, {}]", min_post_group,
                                  dims.post));
  }

  const std::size_t t = std::min(round_up(scale.window_bins, rounding), dims.time);
  const std::size_t half_t = (t + 1) / 2;
  const std::size_t m = std::min(round_up(std::max(min_user_group, half_t), rounding), dims.user);
  const std::size_t n = std::min(round_up(std::max(min_post_group, half_t), rounding), dims.post);

  CULayout layout{scale, dims, {m, n, t}, {}};
  for (std::size_t u = 0; u < dims.user; u += m) {
    for (std::size_t v = 0; v < dims.post; v += n) {
      for (std::size_t s = 0; s < dims.time; s += t) {
        layout.blocks.push_back(
            {{u, v, s}, {std::min(m, dims.user - u), std::min(n, dims.post - v),
                         std::min(t, dims.time - s)}});
      }
    }
  }
  return layout;
}

std::vector<CUBlock> partition(const PTensor& tensor, const CULayout& layout) {
  if (!(tensor.dims() == layout.dims)) {
    throw ConfigError("layout was planned for different tensor dims");
  }
  std::vector<CUBlock> out;
  out.reserve(layout.blocks.size());
  for (const auto& b : layout.blocks) out.push_back(extract_block(tensor, b.location, b.extents));
  return out;
}

}  // namespace mtpop
