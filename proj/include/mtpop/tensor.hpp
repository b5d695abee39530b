#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace mtpop {

/// Row-major dense matrix; the time unfolding of a block maps onto it
/// without copying because time is the fastest-varying tensor axis.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// (user, post, time) triple. Used for tensor dims, block offsets and
/// block extents alike.
struct Index3 {
  std::size_t user = 0;
  std::size_t post = 0;
  std::size_t time = 0;

  std::size_t volume() const { return user * post * time; }
  friend bool operator==(const Index3&, const Index3&) = default;
};

using Dims = Index3;

/// Dense popularity tensor with an observation mask.
///
/// Storage is user-major, time-minor: entry (u, v, t) lives at
/// (u * posts + v) * times + t. Unobserved entries hold exactly 0 until a
/// caller overwrites the value array; observedness is only ever read from
/// the mask.
class PTensor {
 public:
  explicit PTensor(Dims dims);

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return values_.size(); }

  std::size_t offset(std::size_t u, std::size_t v, std::size_t t) const {
    return (u * dims_.post + v) * dims_.time + t;
  }

  /// Bounds-checked element access.
  double at(std::size_t u, std::size_t v, std::size_t t) const;
  bool observed(std::size_t u, std::size_t v, std::size_t t) const;

  /// Writes s at (u, v, t) and marks the entry observed.
  void set_observed(std::size_t u, std::size_t v, std::size_t t, double s);

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<std::uint8_t>& mask() { return mask_; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }

  std::size_t observed_count() const;

  friend bool operator==(const PTensor&, const PTensor&) = default;

 private:
  void check_index(std::size_t u, std::size_t v, std::size_t t) const;

  Dims dims_;
  std::vector<double> values_;
  std::vector<std::uint8_t> mask_;
};

/// Compositional-unit block: a contiguous copy of a sub-tensor.
struct CUBlock {
  Index3 location;
  Index3 extents;
  std::vector<double> data;  // same (user, post, time) ordering as PTensor

  double at(std::size_t u, std::size_t v, std::size_t t) const {
    return data[(u * extents.post + v) * extents.time + t];
  }
};

PTensor new_tensor(Dims dims);

/// Throws IndexError unless offset + extent <= dims on every axis and
/// every extent is positive.
void check_block_bounds(const Dims& dims, const Index3& location, const Index3& extents);

CUBlock extract_block(const PTensor& tensor, const Index3& location, const Index3& extents);

/// Zero tensor of shape `dims` holding `block` at its location.
PTensor embed_block(const Dims& dims, const CUBlock& block);

/// Adds `block` into `target` at the block location (values only).
void accumulate_block(PTensor& target, const CUBlock& block);

/// (m*n) x t matrix with row u*n + v, column t.
RowMatrix unfold_time(const CUBlock& block);
CUBlock fold_time(const RowMatrix& matrix, const Index3& location, const Index3& extents);

/// Elementwise sum; the mask of the result is the OR of both masks.
PTensor add(const PTensor& a, const PTensor& b);
/// Scales values; the mask is unchanged.
PTensor scale(const PTensor& a, double c);

}  // namespace mtpop
