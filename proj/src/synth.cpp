#include "mapfilter/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include "mapfilter/errors.hpp"
#include "mapfilter/text_io.hpp"

namespace mapfilter::synth {

namespace {

enum Stream : std::uint32_t {
  kChannelChoice = 1,
  kPlacePattern = 2,
  kConditionPattern = 3,
  kReferenceImage = 4,
  kQueryImage = 5,
};

std::mt19937_64 stream_rng(std::uint64_t seed, Stream stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

std::vector<double> normal_block(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = normal(rng);
  return out;
}

struct Condition {
  double shift;
  std::vector<double> pattern;  // [cell][noise channel]
  Stream stream;
};

FeatureTensor render(const SynthParams& p, const std::vector<double>& place_pattern,
                     const Condition& cond, std::uint64_t place) {
  const std::size_t cells = static_cast<std::size_t>(p.width) * p.height;
  const std::size_t ns = p.signal_channels.size();
  const std::size_t nn = p.noise_channels.size();
  auto rng = stream_rng(p.seed, cond.stream, place);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s = p.condition_noise_scale;

  FeatureTensor t(p.width, p.height, p.channels);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    float* v = t.data.data() + cell * p.channels;
    for (std::size_t k = 0; k < ns; ++k) {
      const double jitter = p.signal_jitter * s * normal(rng);
      v[p.signal_channels[k]] = static_cast<float>(place_pattern[cell * ns + k] + jitter);
    }
    for (std::size_t k = 0; k < nn; ++k) {
      const double shared = p.condition_pattern_weight * cond.pattern[cell * nn + k];
      v[p.noise_channels[k]] = static_cast<float>(cond.shift + s * (shared + normal(rng)));
    }
  }
  return t;
}

Traverse make_traverse(const SynthParams& p, const std::vector<std::vector<double>>& patterns,
                       const Condition& cond, std::size_t first_place, std::size_t count,
                       const char* prefix, std::size_t id_offset) {
  Traverse tr;
  tr.manifest.gt_mode = GtMode::kFrame;
  tr.manifest.layer_name = "synthetic";
  tr.tensors.resize(count);
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::size_t place = first_place + static_cast<std::size_t>(i);
    tr.tensors[i] = render(p, patterns[place], cond, place);
  }
  for (std::size_t i = 0; i < count; ++i) {
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%04zu", prefix, id_offset + i);
    const double x = static_cast<double>(first_place + i) * p.place_spacing_m;
    tr.manifest.entries.push_back({id, std::string(id) + ".fmap", Position{x, 0.0}});
  }
  return tr;
}

}  // namespace

void SynthParams::validate() const {
  if (num_places < 2) throw InvalidArgument("synth: need at least two places");
  if (num_calibration + num_queries > num_places) {
    throw InvalidArgument("synth: calibration + query images exceed the number of places");
  }
  if (channels == 0 || width == 0 || height == 0) throw InvalidArgument("synth: zero dimension");
  if (!(condition_noise_scale >= 0.0)) throw InvalidArgument("synth: negative noise scale");
  std::vector<int> owner(channels, 0);
  for (std::size_t c : signal_channels) {
    if (c >= channels) throw InvalidArgument("synth: signal channel out of range");
    owner[c] += 1;
  }
  for (std::size_t c : noise_channels) {
    if (c >= channels) throw InvalidArgument("synth: noise channel out of range");
    owner[c] += 2;
  }
  for (std::size_t c = 0; c < channels; ++c) {
    if (owner[c] != 1 && owner[c] != 2) {
      throw InvalidArgument("synth: signal and noise channels must partition all channels (channel " +
                            std::to_string(c) + ")");
    }
  }
}

void assign_channels(SynthParams& p, std::size_t num_signal) {
  if (num_signal > p.channels) throw InvalidArgument("synth: more signal channels than channels");
  std::vector<std::size_t> order(p.channels);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = stream_rng(p.seed, kChannelChoice, 0);
  std::shuffle(order.begin(), order.end(), rng);
  p.signal_channels.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(num_signal));
  p.noise_channels.assign(order.begin() + static_cast<std::ptrdiff_t>(num_signal), order.end());
  std::sort(p.signal_channels.begin(), p.signal_channels.end());
  std::sort(p.noise_channels.begin(), p.noise_channels.end());
}

SynthParams default_params(std::uint64_t seed) {
  SynthParams p;
  p.seed = seed;
  assign_channels(p, 16);
  return p;
}

SynthDataset generate(const SynthParams& params) {
  params.validate();
  const std::size_t cells = static_cast<std::size_t>(params.width) * params.height;

  std::vector<std::vector<double>> patterns(params.num_places);
  for (std::size_t pl = 0; pl < params.num_places; ++pl) {
    auto rng = stream_rng(params.seed, kPlacePattern, pl);
    patterns[pl] = normal_block(rng, cells * params.signal_channels.size());
  }
  auto make_condition = [&](std::uint64_t which, double shift, Stream stream) {
    auto rng = stream_rng(params.seed, kConditionPattern, which);
    return Condition{shift, normal_block(rng, cells * params.noise_channels.size()), stream};
  };
  const Condition ref_cond = make_condition(0, 0.0, kReferenceImage);
  const Condition query_cond = make_condition(1, params.appearance_shift, kQueryImage);

  SynthDataset ds;
  ds.reference = make_traverse(params, patterns, ref_cond, 0, params.num_places, "ref", 0);
  ds.calibration =
      make_traverse(params, patterns, query_cond, 0, params.num_calibration, "calib", 0);
  ds.query = make_traverse(params, patterns, query_cond, params.num_calibration,
                           params.num_queries, "query", 0);
  for (std::size_t i = 0; i < params.num_calibration; ++i) ds.calibration_truth.push_back(i);
  for (std::size_t i = 0; i < params.num_queries; ++i) {
    ds.query_truth.push_back(params.num_calibration + i);
  }
  return ds;
}

void write_dataset(const SynthDataset& ds, const std::filesystem::path& dir) {
  auto emit = [&](const Traverse& tr, const char* name) {
    const auto sub = dir / name;
    std::filesystem::create_directories(sub);
    for (std::size_t i = 0; i < tr.tensors.size(); ++i) {
      write_tensor(tr.tensors[i], sub / tr.manifest.entries[i].tensor_path);
    }
    save_manifest(tr.manifest, sub / "manifest.json");
  };
  emit(ds.reference, "reference");
  emit(ds.calibration, "calibration");
  emit(ds.query, "query");
  write_correspondences(ds.calibration_truth, dir / "calibration_truth.txt");
  write_correspondences(ds.query_truth, dir / "query_truth.txt");
}

std::pair<std::size_t, double> brute_force_best_removal(const CalibrationTriplet& t,
                                                        const ChannelSet& kept) {
  if (kept.size() < 2) throw InvalidArgument("brute_force_best_removal: need two kept channels");
  const std::size_t P = t.query.per_map_dim;
  auto filtered = [&](const PooledMatrix& m, std::size_t drop) {
    std::vector<double> v;
    for (std::size_t c : kept) {
      if (c == drop) continue;
      for (std::size_t k = 0; k < P; ++k) v.push_back(m.values[c * P + k]);
    }
    return v;
  };
  auto euclid = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
  };

  std::size_t best_j = kept.indices().front();
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j : kept) {
    const auto q = filtered(t.query, j);
    const auto r = filtered(t.reference, j);
    const auto n = filtered(t.negative, j);
    const double d = euclid(r, n) - euclid(q, r);
    if (d > best) {
      best = d;
      best_j = j;
    }
  }
  return {best_j, best};
}

std::vector<std::size_t> brute_force_greedy(const CalibrationTriplet& t, double gradient_cutoff) {
  const std::size_t C = t.query.channels;
  const std::size_t P = t.query.per_map_dim;
  double qr = 0.0;
  double rn = 0.0;
  for (std::size_t i = 0; i < C * P; ++i) {
    qr += (t.query.values[i] - t.reference.values[i]) * (t.query.values[i] - t.reference.values[i]);
    rn += (t.reference.values[i] - t.negative.values[i]) *
          (t.reference.values[i] - t.negative.values[i]);
  }
  double previous = std::sqrt(rn) - std::sqrt(qr);

  ChannelSet kept = ChannelSet::all(C);
  std::vector<std::size_t> removed;
  while (kept.size() > 1) {
    const auto [j, score] = brute_force_best_removal(t, kept);
    if (score - previous < gradient_cutoff) break;
    removed.push_back(j);
    kept = kept.without(j);
    previous = score;
  }
  return removed;
}

PooledMatrix naive_pyramid_pool(const FeatureTensor& t) {
  const std::uint32_t W = t.width;
  const std::uint32_t H = t.height;
  struct Range {
    std::uint32_t r0, r1, c0, c1;
  };
  const Range ranges[5] = {
      {0, H, 0, W},
      {0, H / 2, 0, W / 2},
      {0, H / 2, W / 2, W},
      {H / 2, H, 0, W / 2},
      {H / 2, H, W / 2, W},
  };
  PooledMatrix out(t.channels, kPyramidSlots);
  for (std::uint32_t c = 0; c < t.channels; ++c) {
    double global = 0.0;
    for (int q = 0; q < 5; ++q) {
      const Range& rg = ranges[q];
      bool any = false;
      double m = 0.0;
      for (std::uint32_t r = rg.r0; r < rg.r1; ++r) {
        for (std::uint32_t col = rg.c0; col < rg.c1; ++col) {
          const double v = t.at(r, col, c);
          if (!any || v > m) m = v;
          any = true;
        }
      }
      if (q == 0) global = m;
      out.values[c * kPyramidSlots + q] = any ? m : global;
    }
  }
  return out;
}

}  // namespace mapfilter::synth
