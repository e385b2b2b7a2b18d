#include "mapfilter/pooling.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "mapfilter/errors.hpp"

namespace mapfilter {

ChannelSet::ChannelSet(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
}

ChannelSet ChannelSet::all(std::size_t channels) {
  std::vector<std::size_t> idx(channels);
  for (std::size_t c = 0; c < channels; ++c) idx[c] = c;
  return ChannelSet(std::move(idx));
}

bool ChannelSet::contains(std::size_t c) const {
  return std::binary_search(indices_.begin(), indices_.end(), c);
}

ChannelSet ChannelSet::without(std::size_t c) const {
  ChannelSet out;
  out.indices_.reserve(indices_.size());
  for (std::size_t i : indices_) {
    if (i != c) out.indices_.push_back(i);
  }
  return out;
}

PooledMatrix pyramid_pool(const FeatureTensor& t) {
  if (t.width == 0 || t.height == 0 || t.channels == 0 || t.data.size() != t.size()) {
    throw InvalidArgument("pyramid_pool: invalid tensor shape");
  }
  const std::uint32_t C = t.channels;
  const std::uint32_t row_split = t.height / 2;
  const std::uint32_t col_split = t.width / 2;
  constexpr double kLow = -std::numeric_limits<double>::infinity();

  // quad[q][c]: 0=TL 1=TR 2=BL 3=BR
  std::vector<double> quad(4 * static_cast<std::size_t>(C), kLow);
  const float* cell = t.data.data();
  for (std::uint32_t row = 0; row < t.height; ++row) {
    const std::size_t vert = row < row_split ? 0 : 2;
    for (std::uint32_t col = 0; col < t.width; ++col, cell += C) {
      double* q = quad.data() + (vert + (col < col_split ? 0 : 1)) * C;
      for (std::uint32_t c = 0; c < C; ++c) q[c] = std::max(q[c], static_cast<double>(cell[c]));
    }
  }

  PooledMatrix out(C, kPyramidSlots);
  for (std::uint32_t c = 0; c < C; ++c) {
    double global = kLow;
    for (std::size_t q = 0; q < 4; ++q) global = std::max(global, quad[q * C + c]);
    auto r = out.row(c);
    r[0] = global;
    for (std::size_t q = 0; q < 4; ++q) {
      const double v = quad[q * C + c];
      r[1 + q] = v == kLow ? global : v;
    }
  }
  return out;
}

FeatureVector flatten(const PooledMatrix& p, const ChannelSet& kept) {
  if (kept.empty()) throw InvalidArgument("flatten: empty kept set");
  if (kept.bound() > p.channels) {
    throw InvalidArgument("flatten: channel index " + std::to_string(kept.bound() - 1) +
                          " out of range for C=" + std::to_string(p.channels));
  }
  FeatureVector out;
  out.reserve(kept.size() * p.per_map_dim);
  for (std::size_t c : kept) {
    auto r = p.row(c);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

std::vector<PooledMatrix> pyramid_pool_batch(const std::vector<FeatureTensor>& tensors) {
  // Shape errors must surface before entering the parallel region.
  for (const auto& t : tensors) {
    if (t.width == 0 || t.height == 0 || t.channels == 0 || t.data.size() != t.size()) {
      throw InvalidArgument("pyramid_pool: invalid tensor shape");
    }
  }
  std::vector<PooledMatrix> out(tensors.size());
  const auto n = static_cast<std::ptrdiff_t>(tensors.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = pyramid_pool(tensors[i]);
  return out;
}

std::vector<PooledMatrix> pyramid_pool_batch_serial(const std::vector<FeatureTensor>& tensors) {
  std::vector<PooledMatrix> out;
  out.reserve(tensors.size());
  for (const auto& t : tensors) out.push_back(pyramid_pool(t));
  return out;
}

}  // namespace mapfilter
