#include "mapfilter/calib_filter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "mapfilter/errors.hpp"

namespace mapfilter {

namespace {

double squared_row_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

void check_kept(const ChannelSet& kept, std::size_t channels) {
  if (kept.empty()) throw InvalidArgument("kept set is empty");
  if (kept.bound() > channels) throw InvalidArgument("kept channel index out of range");
}

}  // namespace

void CalibrationTriplet::validate() const {
  if (!query.same_shape(reference) || !query.same_shape(negative)) {
    throw InvalidArgument("calibration triplet members differ in C or P");
  }
}

void CalibConfig::validate() const {
  if (num_calibration_images < 1) throw InvalidArgument("num_calibration_images must be >= 1");
  if (!(gradient_cutoff >= 0.0)) throw InvalidArgument("gradient_cutoff must be >= 0");
}

double l2_distance(const PooledMatrix& a, const PooledMatrix& b, const ChannelSet& kept) {
  if (!a.same_shape(b)) throw InvalidArgument("l2_distance: shape mismatch");
  check_kept(kept, a.channels);
  double s = 0.0;
  for (std::size_t c : kept) s += squared_row_diff(a.row(c), b.row(c));
  return std::sqrt(s);
}

TripletDistanceCache::TripletDistanceCache(const CalibrationTriplet& t, const ChannelSet& kept) {
  t.validate();
  const std::size_t C = t.query.channels;
  check_kept(kept, C);
  qr_contrib_.assign(C, 0.0);
  rn_contrib_.assign(C, 0.0);
  kept_.assign(C, 0);
  for (std::size_t c : kept) {
    qr_contrib_[c] = squared_row_diff(t.query.row(c), t.reference.row(c));
    rn_contrib_[c] = squared_row_diff(t.reference.row(c), t.negative.row(c));
    kept_[c] = 1;
    qr_sum_ += qr_contrib_[c];
    rn_sum_ += rn_contrib_[c];
  }
  kept_count_ = kept.size();
}

ChannelSet TripletDistanceCache::kept_set() const {
  std::vector<std::size_t> idx;
  idx.reserve(kept_count_);
  for (std::size_t c = 0; c < kept_.size(); ++c) {
    if (kept_[c]) idx.push_back(c);
  }
  return ChannelSet(std::move(idx));
}

// Subtraction can leave a tiny negative residue once most channels are gone.
double TripletDistanceCache::qr_distance() const { return std::sqrt(std::max(0.0, qr_sum_)); }
double TripletDistanceCache::rn_distance() const { return std::sqrt(std::max(0.0, rn_sum_)); }

double TripletDistanceCache::qr_distance_without(std::size_t c) const {
  return std::sqrt(std::max(0.0, qr_sum_ - qr_contrib_[c]));
}

double TripletDistanceCache::rn_distance_without(std::size_t c) const {
  return std::sqrt(std::max(0.0, rn_sum_ - rn_contrib_[c]));
}

void TripletDistanceCache::remove(std::size_t c) {
  if (c >= kept_.size() || !kept_[c]) throw InvalidArgument("remove: channel not kept");
  kept_[c] = 0;
  --kept_count_;
  qr_sum_ -= qr_contrib_[c];
  rn_sum_ -= rn_contrib_[c];
}

std::vector<double> removal_scores(const CalibrationTriplet& t, const ChannelSet& kept) {
  if (kept.size() < 2) throw InvalidArgument("removal_scores: need at least two kept channels");
  const TripletDistanceCache cache(t, kept);
  std::vector<double> scores;
  scores.reserve(kept.size());
  for (std::size_t j : kept) scores.push_back(cache.objective_without(j));
  return scores;
}

GreedyTrace greedy_filter(const CalibrationTriplet& t, const CalibConfig& cfg) {
  cfg.validate();
  t.validate();
  const std::size_t C = t.query.channels;
  if (C < 2) throw InvalidArgument("greedy_filter: need at least two channels");

  TripletDistanceCache cache(t, ChannelSet::all(C));
  GreedyTrace trace;
  double previous = cache.objective();
  trace.objective.push_back(previous);

  while (cache.kept_count() > 1) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t worst = C;
    for (std::size_t j = 0; j < C; ++j) {
      if (!cache.is_kept(j)) continue;
      const double d = cache.objective_without(j);
      if (d > best) {
        best = d;
        worst = j;
      }
    }
    if (best - previous < cfg.gradient_cutoff) break;
    cache.remove(worst);
    trace.removed.push_back(worst);
    trace.objective.push_back(best);
    previous = best;
  }
  trace.separated = cache.qr_distance() < cache.rn_distance();
  return trace;
}

std::vector<GreedyTrace> greedy_filter_batch(const std::vector<CalibrationTriplet>& triplets,
                                             const CalibConfig& cfg) {
  cfg.validate();
  for (const auto& t : triplets) {
    t.validate();
    if (t.query.channels < 2) throw InvalidArgument("greedy_filter: need at least two channels");
  }
  std::vector<GreedyTrace> out(triplets.size());
  const auto n = static_cast<std::ptrdiff_t>(triplets.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = greedy_filter(triplets[i], cfg);
  return out;
}

std::vector<GreedyTrace> greedy_filter_batch_serial(
    const std::vector<CalibrationTriplet>& triplets, const CalibConfig& cfg) {
  std::vector<GreedyTrace> out;
  out.reserve(triplets.size());
  for (const auto& t : triplets) out.push_back(greedy_filter(t, cfg));
  return out;
}

FilterResult aggregate(const std::vector<std::vector<std::size_t>>& per_image_removed,
                       std::size_t channels) {
  if (per_image_removed.empty()) throw InvalidArgument("aggregate: no calibration images");
  FilterResult r;
  r.per_image_removed = per_image_removed;
  r.removal_counts.assign(channels, 0);
  std::size_t max_remaining = 0;
  for (const auto& removed : per_image_removed) {
    std::vector<char> seen(channels, 0);
    for (std::size_t c : removed) {
      if (c >= channels) throw InvalidArgument("aggregate: removed index out of range");
      if (seen[c]) throw InvalidArgument("aggregate: duplicate removed index");
      seen[c] = 1;
      ++r.removal_counts[c];
    }
    max_remaining = std::max(max_remaining, channels - removed.size());
  }

  std::vector<std::size_t> order(channels);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return r.removal_counts[a] < r.removal_counts[b];
  });
  order.resize(max_remaining);
  r.kept_set = ChannelSet(std::move(order));
  r.kept_count = max_remaining;
  return r;
}

std::vector<CalibrationTriplet> build_triplets(const std::vector<PooledMatrix>& query_pooled,
                                               const std::vector<PooledMatrix>& ref_pooled,
                                               const std::vector<std::size_t>& correspondences,
                                               const CalibConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.num_calibration_images;
  if (query_pooled.size() < n) {
    throw InvalidArgument("requested " + std::to_string(n) + " calibration images but only " +
                          std::to_string(query_pooled.size()) + " available");
  }
  if (correspondences.size() < n) {
    throw InvalidArgument("fewer correspondences than calibration images");
  }

  const std::size_t R = ref_pooled.size();
  const std::size_t radius = cfg.negative_exclusion_radius;
  std::mt19937_64 rng(cfg.rng_seed);
  std::vector<CalibrationTriplet> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t truth = correspondences[i];
    if (truth >= R) throw InvalidArgument("correspondence index out of range");
    const std::size_t lo = truth > radius ? truth - radius : 0;
    const std::size_t hi = std::min(R - 1, truth + radius);
    const std::size_t candidates = R - (hi - lo + 1);
    if (candidates == 0) {
      throw InvalidArgument("reference set too small to exclude a radius of " +
                            std::to_string(radius) + " frames");
    }
    std::uniform_int_distribution<std::size_t> pick(0, candidates - 1);
    std::size_t k = pick(rng);
    if (k >= lo) k += hi - lo + 1;

    CalibrationTriplet t;
    t.index = i;
    t.query = query_pooled[i];
    t.reference = ref_pooled[truth];
    t.negative = ref_pooled[k];
    t.reference_index = truth;
    t.negative_index = k;
    t.validate();
    out.push_back(std::move(t));
  }
  return out;
}

void write_filter_document(const FilterDocument& doc, const std::filesystem::path& path) {
  nlohmann::json j;
  j["layer_name"] = doc.layer_name;
  j["C"] = doc.channels;
  j["P"] = doc.per_map_dim;
  j["K"] = doc.result.kept_count;
  j["kept_set"] = doc.result.kept_set.indices();
  j["removal_counts"] = doc.result.removal_counts;
  j["per_image_removed"] = doc.result.per_image_removed;
  j["negative_indices"] = doc.negative_indices;
  j["separated"] = doc.separated;
  j["final_objective"] = doc.final_objective;
  j["config"] = {
      {"num_calibration_images", doc.config.num_calibration_images},
      {"gradient_cutoff", doc.config.gradient_cutoff},
      {"rng_seed", doc.config.rng_seed},
      {"negative_exclusion_radius", doc.config.negative_exclusion_radius},
  };
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << j.dump(1) << '\n';
}

FilterDocument read_filter_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open filter document: " + path.string());
  FilterDocument doc;
  try {
    const auto j = nlohmann::json::parse(in);
    doc.layer_name = j.value("layer_name", std::string{});
    doc.channels = j.at("C").get<std::size_t>();
    doc.per_map_dim = j.value("P", kPyramidSlots);
    doc.result.kept_count = j.at("K").get<std::size_t>();
    doc.result.kept_set = ChannelSet(j.at("kept_set").get<std::vector<std::size_t>>());
    doc.result.removal_counts = j.value("removal_counts", std::vector<std::size_t>{});
    doc.result.per_image_removed =
        j.value("per_image_removed", std::vector<std::vector<std::size_t>>{});
    doc.negative_indices = j.value("negative_indices", std::vector<std::size_t>{});
    doc.separated = j.value("separated", std::vector<bool>{});
    doc.final_objective = j.value("final_objective", std::vector<double>{});
    if (j.contains("config")) {
      const auto& c = j.at("config");
      doc.config.num_calibration_images = c.value("num_calibration_images", std::size_t{50});
      doc.config.gradient_cutoff = c.value("gradient_cutoff", 0.1);
      doc.config.rng_seed = c.value("rng_seed", std::uint64_t{0});
      doc.config.negative_exclusion_radius = c.value("negative_exclusion_radius", std::size_t{20});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed filter document " + path.string() + ": " + e.what());
  }
  if (doc.result.kept_set.empty() || doc.result.kept_set.bound() > doc.channels ||
      doc.result.kept_set.size() != doc.result.kept_count) {
    throw DataError("inconsistent kept_set in filter document " + path.string());
  }
  return doc;
}

}  // namespace mapfilter
