#include "mtpop/tensor.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "mtpop/error.hpp"

namespace mtpop {

namespace {

Dims validated(Dims dims) {
  if (dims.user == 0 || dims.post == 0 || dims.time == 0) {
    throw ConfigError(fmt::format("tensor dims must be positive, got ({}, {}, {})", dims.user,
                                  dims.post, dims.time));
  }
  return dims;
}

void check_same_dims(const PTensor& a, const PTensor& b) {
  if (!(a.dims() == b.dims())) {
    throw ConfigError(fmt::format("dimension mismatch: ({}, {}, {}) vs ({}, {}, {})",
                                  a.dims().user, a.dims().post, a.dims().time, b.dims().user,
                                  b.dims().post, b.dims().time));
  }
}

}  // namespace

PTensor::PTensor(Dims dims)
    : dims_(validated(dims)), values_(dims_.volume(), 0.0), mask_(dims_.volume(), 0) {}

void PTensor::check_index(std::size_t u, std::size_t v, std::size_t t) const {
  if (u >= dims_.user || v >= dims_.post || t >= dims_.time) {
    throw IndexError(fmt::format("index ({}, {}, {}) out of range for dims ({}, {}, {})", u, v,
                                 t, dims_.user, dims_.post, dims_.time));
  }
}

double PTensor::at(std::size_t u, std::size_t v, std::size_t t) const {
  check_index(u, v, t);
  return values_[offset(u, v, t)];
}

bool PTensor::observed(std::size_t u, std::size_t v, std::size_t t) const {
  check_index(u, v, t);
  return mask_[offset(u, v, t)] != 0;
}

void PTensor::set_observed(std::size_t u, std::size_t v, std::size_t t, double s) {
  check_index(u, v, t);
  const std::size_t k = offset(u, v, t);
  values_[k] = s;
  mask_[k] = 1;
}

std::size_t PTensor::observed_count() const {
  std::size_t n = 0;
  for (auto m : mask_) n += m != 0;
  return n;
}

PTensor new_tensor(Dims dims) { return PTensor(dims); }

void check_block_bounds(const Dims& dims, const Index3& location, const Index3& extents) {
  const bool positive = extents.user > 0 && extents.post > 0 && extents.time > 0;
  const bool fits = location.user + extents.user <= dims.user &&
                    location.post + extents.post <= dims.post &&
                    location.time + extents.time <= dims.time;
  if (!positive || !fits) {
    throw IndexError(fmt::format(
        "block at ({}, {}, {}) with extents ({}, {}, {}) does not fit dims ({}, {}, {})",
        location.user, location.post, location.time, extents.user, extents.post, extents.time,
        dims.user, dims.post, dims.time));
  }
}

CUBlock extract_block(const PTensor& tensor, const Index3& location, const Index3& extents) {
  check_block_bounds(tensor.dims(), location, extents);
  CUBlock block{location, extents, std::vector<double>(extents.volume())};
  const auto& src = tensor.values();
  auto out = block.data.begin();
  for (std::size_t u = 0; u < extents.user; ++u) {
    for (std::size_t v = 0; v < extents.post; ++v) {
      const auto first = src.begin() + static_cast<std::ptrdiff_t>(tensor.offset(
                                           location.user + u, location.post + v, location.time));
      out = std::copy(first, first + static_cast<std::ptrdiff_t>(extents.time), out);
    }
  }
  return block;
}

void accumulate_block(PTensor& target, const CUBlock& block) {
  check_block_bounds(target.dims(), block.location, block.extents);
  auto& dst = target.values();
  const auto& e = block.extents;
  std::size_t k = 0;
  for (std::size_t u = 0; u < e.user; ++u) {
    for (std::size_t v = 0; v < e.post; ++v) {
      std::size_t base =
          target.offset(block.location.user + u, block.location.post + v, block.location.time);
      for (std::size_t t = 0; t < e.time; ++t) dst[base + t] += block.data[k++];
    }
  }
}

PTensor embed_block(const Dims& dims, const CUBlock& block) {
  PTensor out(dims);
  accumulate_block(out, block);
  return out;
}

RowMatrix unfold_time(const CUBlock& block) {
  const auto rows = static_cast<Eigen::Index>(block.extents.user * block.extents.post);
  const auto cols = static_cast<Eigen::Index>(block.extents.time);
  return Eigen::Map<const RowMatrix>(block.data.data(), rows, cols);
}

CUBlock fold_time(const RowMatrix& matrix, const Index3& location, const Index3& extents) {
  if (static_cast<std::size_t>(matrix.rows()) != extents.user * extents.post ||
      static_cast<std::size_t>(matrix.cols()) != extents.time) {
    throw ConfigError(fmt::format("cannot fold a {}x{} matrix into extents ({}, {}, {})",
                                  matrix.rows(), matrix.cols(), extents.user, extents.post,
                                  extents.time));
  }
  CUBlock block{location, extents, std::vector<double>(matrix.data(), matrix.data() + matrix.size())};
  return block;
}

PTensor add(const PTensor& a, const PTensor& b) {
  check_same_dims(a, b);
  PTensor out(a.dims());
  for (std::size_t k = 0; k < a.size(); ++k) {
    out.values()[k] = a.values()[k] + b.values()[k];
    out.mask()[k] = static_cast<std::uint8_t>(a.mask()[k] | b.mask()[k]);
  }
  return out;
}

PTensor scale(const PTensor& a, double c) {
  PTensor out = a;
  for (auto& x : out.values()) x *= c;
  return out;
}

}  // namespace mtpop
