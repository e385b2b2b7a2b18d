#pragma once

#include <chrono>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mapfilter/pooling.hpp"

namespace mapfilter {

inline constexpr double kBestScore = 0.999;
inline constexpr double kWorstScore = 0.001;

struct MatcherConfig {
  std::size_t exclusion_window = 10;  // half-width, frames
};

struct MatchOutcome {
  std::string query_id;
  std::size_t best_index = 0;
  double quality = 1.0;
  double best_distance = 0.0;
  std::vector<double> normalized_scores;
};

// 1 - cos(a, b); 1.0 when either vector has zero norm.
double cosine_distance(std::span<const double> a, std::span<const double> b);

// Affine map of distances onto [0.001, 0.999], smallest distance -> 0.999.
// A constant input maps to 0.5 everywhere.
std::vector<double> normalize_scores(std::span<const double> distances);

// Ratio of the best score to the highest score outside [best-w, best+w];
// 1 when the window covers every index.
double match_quality(std::span<const double> scores, std::size_t best_index, std::size_t window);

/// Flattened, immutable reference templates restricted to one kept set.
class ReferenceDatabase {
 public:
  ReferenceDatabase(const std::vector<PooledMatrix>& refs, ChannelSet kept);

  std::size_t size() const { return count_; }
  std::size_t dim() const { return dim_; }
  std::size_t channels() const { return channels_; }
  std::size_t per_map_dim() const { return per_map_dim_; }
  const ChannelSet& kept() const { return kept_; }

  MatchOutcome match(const PooledMatrix& query, const MatcherConfig& cfg) const;

 private:
  ChannelSet kept_;
  std::size_t channels_ = 0;
  std::size_t per_map_dim_ = 0;
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> rows_;  // [count][dim]
  std::vector<double> norms_;
};

MatchOutcome match_query(const PooledMatrix& query, const std::vector<PooledMatrix>& refs,
                         const ChannelSet& kept, const MatcherConfig& cfg);

struct TimedMatches {
  std::vector<MatchOutcome> outcomes;
  std::vector<std::chrono::nanoseconds> per_query_time;
};

// Matches every query against the database. The OpenMP version fans out over
// queries; results are identical to the serial reference.
TimedMatches match_queries(const ReferenceDatabase& db, const std::vector<PooledMatrix>& queries,
                           const std::vector<std::string>& query_ids, const MatcherConfig& cfg);
TimedMatches match_queries_serial(const ReferenceDatabase& db,
                                  const std::vector<PooledMatrix>& queries,
                                  const std::vector<std::string>& query_ids,
                                  const MatcherConfig& cfg);

}  // namespace mapfilter
