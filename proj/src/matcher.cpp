#include "mapfilter/matcher.hpp"

#include <algorithm>
#include <cmath>

#include "mapfilter/errors.hpp"

namespace mapfilter {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine_distance: length mismatch");
  const double na = std::sqrt(dot(a.data(), a.data(), a.size()));
  const double nb = std::sqrt(dot(b.data(), b.data(), b.size()));
  if (na == 0.0 || nb == 0.0) return 1.0;
  const double cos = dot(a.data(), b.data(), a.size()) / (na * nb);
  return 1.0 - std::clamp(cos, -1.0, 1.0);
}

std::vector<double> normalize_scores(std::span<const double> distances) {
  if (distances.size() < 2) throw InvalidArgument("normalize_scores: need at least two values");
  const auto [lo, hi] = std::minmax_element(distances.begin(), distances.end());
  const double min = *lo;
  const double max = *hi;
  std::vector<double> out(distances.size(), 0.5);
  if (max == min) return out;
  const double span = max - min;
  for (std::size_t k = 0; k < distances.size(); ++k) {
    out[k] = kWorstScore + (kBestScore - kWorstScore) * (max - distances[k]) / span;
  }
  return out;
}

double match_quality(std::span<const double> scores, std::size_t best_index, std::size_t window) {
  if (best_index >= scores.size()) throw InvalidArgument("match_quality: best index out of range");
  const std::size_t lo = best_index > window ? best_index - window : 0;
  const std::size_t hi = best_index + window;  // inclusive
  double runner_up = -1.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (k >= lo && k <= hi) continue;
    runner_up = std::max(runner_up, scores[k]);
  }
  if (runner_up <= 0.0) return 1.0;
  return std::max(1.0, scores[best_index] / runner_up);
}

ReferenceDatabase::ReferenceDatabase(const std::vector<PooledMatrix>& refs, ChannelSet kept)
    : kept_(std::move(kept)) {
  if (refs.size() < 2) throw InvalidArgument("matcher needs at least two references");
  channels_ = refs.front().channels;
  per_map_dim_ = refs.front().per_map_dim;
  if (kept_.empty()) throw InvalidArgument("matcher: empty kept set");
  if (kept_.bound() > channels_) {
    throw InvalidArgument("matcher: kept channel out of range for C=" + std::to_string(channels_));
  }
  count_ = refs.size();
  dim_ = kept_.size() * per_map_dim_;
  rows_.reserve(count_ * dim_);
  norms_.reserve(count_);
  for (const auto& r : refs) {
    if (r.channels != channels_ || r.per_map_dim != per_map_dim_) {
      throw InvalidArgument("matcher: references differ in C or P");
    }
    const auto v = flatten(r, kept_);
    rows_.insert(rows_.end(), v.begin(), v.end());
    norms_.push_back(std::sqrt(dot(v.data(), v.data(), v.size())));
  }
}

MatchOutcome ReferenceDatabase::match(const PooledMatrix& query, const MatcherConfig& cfg) const {
  if (query.channels != channels_ || query.per_map_dim != per_map_dim_) {
    throw InvalidArgument("matcher: query shape differs from references");
  }
  const auto q = flatten(query, kept_);
  const double qn = std::sqrt(dot(q.data(), q.data(), q.size()));

  std::vector<double> dist(count_);
  for (std::size_t k = 0; k < count_; ++k) {
    if (qn == 0.0 || norms_[k] == 0.0) {
      dist[k] = 1.0;
      continue;
    }
    const double cos = dot(q.data(), rows_.data() + k * dim_, dim_) / (qn * norms_[k]);
    dist[k] = 1.0 - std::clamp(cos, -1.0, 1.0);
  }

  MatchOutcome out;
  // min_element returns the first minimum: ties go to the lowest index.
  out.best_index = static_cast<std::size_t>(std::min_element(dist.begin(), dist.end()) - dist.begin());
  out.best_distance = dist[out.best_index];
  out.normalized_scores = normalize_scores(dist);
  out.quality = match_quality(out.normalized_scores, out.best_index, cfg.exclusion_window);
  return out;
}

MatchOutcome match_query(const PooledMatrix& query, const std::vector<PooledMatrix>& refs,
                         const ChannelSet& kept, const MatcherConfig& cfg) {
  return ReferenceDatabase(refs, kept).match(query, cfg);
}

namespace {

void check_queries(const ReferenceDatabase& db, const std::vector<PooledMatrix>& queries,
                   const std::vector<std::string>& ids) {
  if (ids.size() != queries.size()) throw InvalidArgument("match_queries: id count mismatch");
  for (const auto& q : queries) {
    if (q.channels != db.channels() || q.per_map_dim != db.per_map_dim()) {
      throw InvalidArgument("matcher: query shape differs from references");
    }
  }
}

}  // namespace

TimedMatches match_queries(const ReferenceDatabase& db, const std::vector<PooledMatrix>& queries,
                           const std::vector<std::string>& query_ids, const MatcherConfig& cfg) {
  check_queries(db, queries, query_ids);
  TimedMatches out;
  out.outcomes.resize(queries.size());
  out.per_query_time.resize(queries.size());
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto start = std::chrono::steady_clock::now();
    out.outcomes[i] = db.match(queries[i], cfg);
    out.per_query_time[i] = std::chrono::steady_clock::now() - start;
    out.outcomes[i].query_id = query_ids[i];
  }
  return out;
}

TimedMatches match_queries_serial(const ReferenceDatabase& db,
                                  const std::vector<PooledMatrix>& queries,
                                  const std::vector<std::string>& query_ids,
                                  const MatcherConfig& cfg) {
  check_queries(db, queries, query_ids);
  TimedMatches out;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    auto m = db.match(queries[i], cfg);
    out.per_query_time.push_back(std::chrono::steady_clock::now() - start);
    m.query_id = query_ids[i];
    out.outcomes.push_back(std::move(m));
  }
  return out;
}

}  // namespace mapfilter
