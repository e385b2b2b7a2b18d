#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mapfilter/pooling.hpp"

namespace mapfilter {

/// Query image, its true reference and a negative reference from elsewhere in
/// the database, all pooled at the same layer.
struct CalibrationTriplet {
  std::size_t index = 0;
  PooledMatrix query;
  PooledMatrix reference;
  PooledMatrix negative;
  std::size_t reference_index = 0;
  std::size_t negative_index = 0;

  void validate() const;
};

struct CalibConfig {
  std::size_t num_calibration_images = 50;
  double gradient_cutoff = 0.1;
  std::uint64_t rng_seed = 0;
  std::size_t negative_exclusion_radius = 20;

  void validate() const;
};

// Euclidean distance between the kept rows of a and b.
double l2_distance(const PooledMatrix& a, const PooledMatrix& b, const ChannelSet& kept);

// D(j) = |r - n| - |q - r| over kept \ {j}, one entry per kept channel in
// ascending order. Requires |kept| >= 2.
std::vector<double> removal_scores(const CalibrationTriplet& t, const ChannelSet& kept);

/// Per-channel squared-difference contributions for the (q,r) and (r,n)
/// pairs. Removing a channel subtracts its contribution from the running
/// sums, so a leave-one-out distance costs O(1).
class TripletDistanceCache {
 public:
  TripletDistanceCache(const CalibrationTriplet& t, const ChannelSet& kept);

  std::size_t kept_count() const { return kept_count_; }
  bool is_kept(std::size_t c) const { return kept_[c] != 0; }
  ChannelSet kept_set() const;

  double qr_distance() const;
  double rn_distance() const;
  double qr_distance_without(std::size_t c) const;
  double rn_distance_without(std::size_t c) const;

  double objective() const { return rn_distance() - qr_distance(); }
  double objective_without(std::size_t c) const {
    return rn_distance_without(c) - qr_distance_without(c);
  }

  void remove(std::size_t c);

 private:
  std::vector<double> qr_contrib_;
  std::vector<double> rn_contrib_;
  std::vector<char> kept_;
  std::size_t kept_count_ = 0;
  double qr_sum_ = 0.0;
  double rn_sum_ = 0.0;
};

struct GreedyTrace {
  std::vector<std::size_t> removed;  // in removal order
  // objective[0] is the unfiltered score; objective[i] follows the i-th removal.
  std::vector<double> objective;
  // Same-place pair closer than the different-place pair when the loop stopped.
  bool separated = false;
};

// Greedy backward elimination of the worst channel until the per-step gain
// drops below cfg.gradient_cutoff or a single channel remains.
GreedyTrace greedy_filter(const CalibrationTriplet& t, const CalibConfig& cfg);

std::vector<GreedyTrace> greedy_filter_batch(const std::vector<CalibrationTriplet>& triplets,
                                             const CalibConfig& cfg);
std::vector<GreedyTrace> greedy_filter_batch_serial(
    const std::vector<CalibrationTriplet>& triplets, const CalibConfig& cfg);

struct FilterResult {
  std::vector<std::vector<std::size_t>> per_image_removed;
  std::vector<std::size_t> removal_counts;
  ChannelSet kept_set;
  std::size_t kept_count = 0;
};

// Sums removals across images; keeps the K least-removed channels (ties to the
// lower index) where K is the largest per-image remaining count.
FilterResult aggregate(const std::vector<std::vector<std::size_t>>& per_image_removed,
                       std::size_t channels);

// Pairs the first cfg.num_calibration_images queries with their true
// reference and a seeded uniform negative outside the exclusion band.
std::vector<CalibrationTriplet> build_triplets(const std::vector<PooledMatrix>& query_pooled,
                                               const std::vector<PooledMatrix>& ref_pooled,
                                               const std::vector<std::size_t>& correspondences,
                                               const CalibConfig& cfg);

/// Everything written to a filter-result document.
struct FilterDocument {
  std::string layer_name;
  std::size_t channels = 0;
  std::size_t per_map_dim = kPyramidSlots;
  FilterResult result;
  CalibConfig config;
  std::vector<std::size_t> negative_indices;
  std::vector<bool> separated;
  std::vector<double> final_objective;
};

void write_filter_document(const FilterDocument& doc, const std::filesystem::path& path);
FilterDocument read_filter_document(const std::filesystem::path& path);

}  // namespace mapfilter
