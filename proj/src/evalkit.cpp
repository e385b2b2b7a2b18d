#include "mapfilter/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mapfilter/errors.hpp"

namespace mapfilter {

void EvalConfig::validate() const {
  if (!(tolerance >= 0.0)) throw InvalidArgument("tolerance must be >= 0");
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i - 1])) {
      throw InvalidArgument("thresholds must be strictly increasing");
    }
  }
}

bool is_correct(const MatchOutcome& outcome, const GroundTruth& truth, const EvalConfig& cfg,
                std::span<const std::optional<Position>> ref_positions) {
  if (cfg.gt_mode == GtMode::kFrame) {
    if (!truth.true_index) throw InvalidArgument("frame-mode ground truth needs a true index");
    const double gap = std::abs(static_cast<double>(outcome.best_index) -
                                static_cast<double>(*truth.true_index));
    return gap <= cfg.tolerance;
  }
  if (!truth.query_position) throw InvalidArgument("metric-mode ground truth needs a query position");
  if (outcome.best_index >= ref_positions.size() || !ref_positions[outcome.best_index]) {
    throw InvalidArgument("metric mode: matched reference has no position");
  }
  const Position& m = *ref_positions[outcome.best_index];
  const double dist = std::hypot(m.x - truth.query_position->x, m.y - truth.query_position->y);
  return dist <= cfg.tolerance;
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

std::vector<double> default_thresholds(const std::vector<MatchOutcome>& outcomes,
                                       std::size_t count) {
  if (outcomes.empty()) throw InvalidArgument("no match outcomes");
  auto [lo, hi] = std::minmax_element(outcomes.begin(), outcomes.end(),
                                      [](const auto& a, const auto& b) { return a.quality < b.quality; });
  const double min = lo->quality;
  const double max = hi->quality;
  if (count < 2 || max == min) return {min};
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = min + (max - min) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  out.back() = max;
  return out;
}

PRCurve pr_sweep(const std::vector<MatchOutcome>& outcomes, const std::vector<GroundTruth>& truths,
                 const EvalConfig& cfg, std::span<const std::optional<Position>> ref_positions) {
  cfg.validate();
  if (outcomes.empty()) throw InvalidArgument("pr_sweep: empty outcome list");
  if (truths.size() != outcomes.size()) throw InvalidArgument("pr_sweep: one truth per outcome required");

  std::vector<char> correct(outcomes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    correct[i] = is_correct(outcomes[i], truths[i], cfg, ref_positions);
  }
  const auto thresholds = cfg.thresholds.empty() ? default_thresholds(outcomes) : cfg.thresholds;
  const double total = static_cast<double>(outcomes.size());

  PRCurve curve;
  curve.points.reserve(thresholds.size());
  for (double t : thresholds) {
    std::size_t accepted = 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (outcomes[i].quality >= t) {
        ++accepted;
        hits += correct[i];
      }
    }
    PRPoint p;
    p.threshold = t;
    p.precision = accepted == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(accepted);
    p.recall = static_cast<double>(hits) / total;
    p.f1 = f1_score(p.precision, p.recall);
    curve.max_f1 = std::max(curve.max_f1, p.f1);
    curve.points.push_back(p);
  }
  return curve;
}

TimingReport timing_report(std::size_t kept, std::size_t channels,
                           std::span<const double> filtered_ms,
                           std::span<const double> unfiltered_ms) {
  if (filtered_ms.empty() || unfiltered_ms.empty()) {
    throw InvalidArgument("timing_report: empty timing list");
  }
  if (channels == 0) throw InvalidArgument("timing_report: zero channels");
  TimingReport r;
  r.mean_filtered_ms =
      std::accumulate(filtered_ms.begin(), filtered_ms.end(), 0.0) / static_cast<double>(filtered_ms.size());
  r.mean_unfiltered_ms = std::accumulate(unfiltered_ms.begin(), unfiltered_ms.end(), 0.0) /
                         static_cast<double>(unfiltered_ms.size());
  r.time_ratio = r.mean_unfiltered_ms > 0.0 ? r.mean_filtered_ms / r.mean_unfiltered_ms : 1.0;
  r.kept = kept;
  r.channels = channels;
  r.dimensional_reduction = static_cast<double>(kept) / static_cast<double>(channels);
  return r;
}

std::vector<double> to_milliseconds(std::span<const std::chrono::nanoseconds> times) {
  std::vector<double> out;
  out.reserve(times.size());
  for (auto t : times) out.push_back(std::chrono::duration<double, std::milli>(t).count());
  return out;
}

}  // namespace mapfilter
