#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mapfilter/evalkit.hpp"
#include "mapfilter/matcher.hpp"

namespace mapfilter {

// Shortest round-trip decimal form.
std::string format_double(double v);

// "[a,b,c]" using format_double.
std::string format_vector(const std::vector<double>& v);

// One reference ordinal per line; blank lines and '#' comments are skipped.
std::vector<std::size_t> read_correspondences(const std::filesystem::path& path);
void write_correspondences(const std::vector<std::size_t>& c, const std::filesystem::path& path);

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

/// Delimited match table: `#key=value` echo lines, then
/// `query_id,best_index,quality,best_distance` rows.
void write_match_table(const std::vector<MatchOutcome>& outcomes, const ConfigEcho& echo,
                       const std::filesystem::path& path);
// Outcomes come back without normalized_scores.
std::vector<MatchOutcome> read_match_table(const std::filesystem::path& path);

void write_pr_curve(const PRCurve& curve, const ConfigEcho& echo, const std::filesystem::path& path);

}  // namespace mapfilter
