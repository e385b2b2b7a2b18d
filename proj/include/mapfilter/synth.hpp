#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "mapfilter/calib_filter.hpp"
#include "mapfilter/pooling.hpp"
#include "mapfilter/tensor_store.hpp"

namespace mapfilter::synth {

/// Two-condition synthetic traverse. Signal channels carry a per-place pattern
/// shared by both conditions; noise channels are redrawn per condition and
/// share a condition-wide pattern, so they correlate within a condition only.
struct SynthParams {
  std::size_t num_places = 300;
  std::size_t num_calibration = 50;
  std::size_t num_queries = 100;
  std::uint32_t channels = 64;
  std::uint32_t width = 4;
  std::uint32_t height = 4;
  std::vector<std::size_t> signal_channels;
  std::vector<std::size_t> noise_channels;
  double condition_noise_scale = 1.0;
  double appearance_shift = 1.0;
  // Weight of the condition-wide pattern on noise channels.
  double condition_pattern_weight = 1.0;
  // Per-condition jitter on signal channels, relative to condition_noise_scale.
  double signal_jitter = 0.1;
  double place_spacing_m = 10.0;
  std::uint64_t seed = 42;

  void validate() const;
};

// Pinned defaults: 300 places, 50 calibration + 100 query images, C = 64 with
// 16 signal channels chosen by seeded permutation.
SynthParams default_params(std::uint64_t seed = 42);

// Splits channels into `num_signal` signal channels (sorted, seeded choice) and
// the complementary noise channels.
void assign_channels(SynthParams& p, std::size_t num_signal);

struct Traverse {
  DatasetManifest manifest;
  std::vector<FeatureTensor> tensors;
};

struct SynthDataset {
  Traverse reference;
  Traverse calibration;
  Traverse query;
  std::vector<std::size_t> calibration_truth;  // reference ordinal per calibration image
  std::vector<std::size_t> query_truth;
};

// Deterministic for a fixed seed; each image draws from its own RNG stream.
SynthDataset generate(const SynthParams& params);

// Writes reference/, calibration/, query/ (FMAP files + manifest.json) and the
// two truth files under `dir`.
void write_dataset(const SynthDataset& ds, const std::filesystem::path& dir);

// --- oracles -------------------------------------------------------------

// Evaluates D(j) for every kept j by rebuilding the filtered vectors from
// scratch. Returns (argmax, max) with lowest-index tie-break.
std::pair<std::size_t, double> brute_force_best_removal(const CalibrationTriplet& t,
                                                        const ChannelSet& kept);

// Full greedy trace using only brute_force_best_removal and the cut-off rule.
std::vector<std::size_t> brute_force_greedy(const CalibrationTriplet& t, double gradient_cutoff);

// Nested-loop pyramid pooling over explicit quadrant ranges.
PooledMatrix naive_pyramid_pool(const FeatureTensor& t);

}  // namespace mapfilter::synth
