#ifndef BAPQP_BLOCK_VECTOR_HPP
#define BAPQP_BLOCK_VECTOR_HPP

#include <bapqp/core.hpp>

#include <cmath>
#include <span>
#include <vector>

namespace bapqp {

/// A vector partitioned into one segment per block, x = (x_0; x_1; ...; x_N).
class BlockVector {
 public:
  BlockVector() = default;
  explicit BlockVector(std::span<const Index> sizes) {
    segments_.reserve(sizes.size());
    for (Index n : sizes) segments_.push_back(Vector::Zero(n));
  }
  explicit BlockVector(std::vector<Vector> segments) : segments_(std::move(segments)) {}

  std::size_t size() const noexcept { return segments_.size(); }
  Vector& operator[](std::size_t i) { return segments_[i]; }
  const Vector& operator[](std::size_t i) const { return segments_[i]; }

  auto begin() { return segments_.begin(); }
  auto end() { return segments_.end(); }
  auto begin() const { return segments_.begin(); }
  auto end() const { return segments_.end(); }

  Index total_size() const {
    Index n = 0;
    for (const auto& s : segments_) n += s.size();
    return n;
  }

  std::vector<Index> sizes() const {
    std::vector<Index> out;
    out.reserve(segments_.size());
    for (const auto& s : segments_) out.push_back(s.size());
    return out;
  }

  void set_zero() {
    for (auto& s : segments_) s.setZero();
  }

  double squared_norm() const {
    double acc = 0.0;
    for (const auto& s : segments_) acc += s.squaredNorm();
    return acc;
  }
  double norm() const { return std::sqrt(squared_norm()); }

  double dot(const BlockVector& other) const {
    require_dim(other.size() == size(), "BlockVector::dot: block count mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < size(); ++i) acc += segments_[i].dot(other[i]);
    return acc;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& s : segments_)
      if (s.size() > 0) m = std::max(m, s.cwiseAbs().maxCoeff());
    return m;
  }

  BlockVector& operator+=(const BlockVector& o) {
    for (std::size_t i = 0; i < size(); ++i) segments_[i] += o[i];
    return *this;
  }
  BlockVector& operator-=(const BlockVector& o) {
    for (std::size_t i = 0; i < size(); ++i) segments_[i] -= o[i];
    return *this;
  }
  BlockVector& operator*=(double a) {
    for (auto& s : segments_) s *= a;
    return *this;
  }

  friend BlockVector operator-(BlockVector a, const BlockVector& b) { return a -= b; }
  friend BlockVector operator+(BlockVector a, const BlockVector& b) { return a += b; }
  friend BlockVector operator*(double a, BlockVector b) { return b *= a; }

  bool operator==(const BlockVector& o) const {
    if (size() != o.size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (segments_[i].size() != o[i].size()) return false;
      for (Index j = 0; j < segments_[i].size(); ++j)
        if (segments_[i][j] != o[i][j]) return false;
    }
    return true;
  }

 private:
  std::vector<Vector> segments_;
};

/// Splits a flat vector into segments of the given sizes.
inline BlockVector split_blocks(std::span<const Index> sizes, const Vector& flat) {
  Index total = 0;
  for (Index n : sizes) total += n;
  if (flat.size() != total)
    throw DimensionError("split_blocks: flat length " + std::to_string(flat.size()) +
                         " != " + std::to_string(total));
  std::vector<Vector> segs;
  segs.reserve(sizes.size());
  Index off = 0;
  for (Index n : sizes) {
    segs.emplace_back(flat.segment(off, n));
    off += n;
  }
  return BlockVector(std::move(segs));
}

inline Vector concat_blocks(const BlockVector& x) {
  Vector flat(x.total_size());
  Index off = 0;
  for (const auto& s : x) {
    flat.segment(off, s.size()) = s;
    off += s.size();
  }
  return flat;
}

}  // namespace bapqp

#endif  // BAPQP_BLOCK_VECTOR_HPP
