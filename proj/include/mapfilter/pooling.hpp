#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mapfilter/tensor_store.hpp"

namespace mapfilter {

inline constexpr std::size_t kPyramidSlots = 5;

/// Pooled activations, one row of `per_map_dim` values per channel.
/// Pyramid rows are laid out as [global, top-left, top-right, bottom-left, bottom-right].
struct PooledMatrix {
  std::size_t channels = 0;
  std::size_t per_map_dim = 0;
  std::vector<double> values;  // [channels][per_map_dim]

  PooledMatrix() = default;
  PooledMatrix(std::size_t c, std::size_t p) : channels(c), per_map_dim(p), values(c * p, 0.0) {}

  std::span<double> row(std::size_t c) { return {values.data() + c * per_map_dim, per_map_dim}; }
  std::span<const double> row(std::size_t c) const {
    return {values.data() + c * per_map_dim, per_map_dim};
  }

  bool same_shape(const PooledMatrix& o) const {
    return channels == o.channels && per_map_dim == o.per_map_dim;
  }

  bool operator==(const PooledMatrix&) const = default;
};

/// Sorted, duplicate-free set of channel indices.
class ChannelSet {
 public:
  ChannelSet() = default;
  explicit ChannelSet(std::vector<std::size_t> indices);

  static ChannelSet all(std::size_t channels);

  const std::vector<std::size_t>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  bool contains(std::size_t c) const;
  // Largest index + 1, or 0 when empty.
  std::size_t bound() const { return indices_.empty() ? 0 : indices_.back() + 1; }

  ChannelSet without(std::size_t c) const;

  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

  bool operator==(const ChannelSet&) const = default;

 private:
  std::vector<std::size_t> indices_;
};

using FeatureVector = std::vector<double>;

// Max pyramid pooling: per channel the global max plus the max of each quadrant.
// Rows split at floor(H/2) and columns at floor(W/2); an empty quadrant repeats
// the global max.
PooledMatrix pyramid_pool(const FeatureTensor& t);

// Concatenates the rows of the kept channels in ascending index order.
// Throws InvalidArgument on an empty set or an out-of-range index.
FeatureVector flatten(const PooledMatrix& p, const ChannelSet& kept);

// Pools a batch of tensors. The OpenMP version parallelises over images; the
// serial one is the reference it is tested against.
std::vector<PooledMatrix> pyramid_pool_batch(const std::vector<FeatureTensor>& tensors);
std::vector<PooledMatrix> pyramid_pool_batch_serial(const std::vector<FeatureTensor>& tensors);

}  // namespace mapfilter
