#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mapfilter/matcher.hpp"
#include "mapfilter/tensor_store.hpp"

namespace mapfilter {

struct EvalConfig {
  GtMode gt_mode = GtMode::kFrame;
  double tolerance = 10.0;          // frames or meters, per gt_mode
  std::vector<double> thresholds;   // strictly increasing; empty = default grid

  void validate() const;
};

/// Ground truth for one query: the true reference ordinal (frame mode) or the
/// query's planar position (metric mode).
struct GroundTruth {
  std::optional<std::size_t> true_index;
  std::optional<Position> query_position;
};

bool is_correct(const MatchOutcome& outcome, const GroundTruth& truth, const EvalConfig& cfg,
                std::span<const std::optional<Position>> ref_positions = {});

struct PRPoint {
  double threshold = 0.0;
  double precision = 1.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct PRCurve {
  std::vector<PRPoint> points;
  double max_f1 = 0.0;
};

double f1_score(double precision, double recall);

// `count` evenly spaced thresholds from the lowest to the highest quality.
std::vector<double> default_thresholds(const std::vector<MatchOutcome>& outcomes,
                                       std::size_t count = 100);

// A match is accepted at threshold t when quality >= t. Precision with nothing
// accepted is 1; recall is over all queries.
PRCurve pr_sweep(const std::vector<MatchOutcome>& outcomes, const std::vector<GroundTruth>& truths,
                 const EvalConfig& cfg, std::span<const std::optional<Position>> ref_positions = {});

struct TimingReport {
  double mean_filtered_ms = 0.0;
  double mean_unfiltered_ms = 0.0;
  double time_ratio = 1.0;  // filtered / unfiltered
  std::size_t kept = 0;
  std::size_t channels = 0;
  double dimensional_reduction = 1.0;  // kept / channels
};

TimingReport timing_report(std::size_t kept, std::size_t channels,
                           std::span<const double> filtered_ms,
                           std::span<const double> unfiltered_ms);

std::vector<double> to_milliseconds(std::span<const std::chrono::nanoseconds> times);

}  // namespace mapfilter
