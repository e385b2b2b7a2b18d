#include "mapfilter/text_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mapfilter/errors.hpp"

namespace mapfilter {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

void write_echo(std::ostream& out, const ConfigEcho& echo) {
  for (const auto& [k, v] : echo) out << '#' << k << '=' << v << '\n';
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& field, const std::filesystem::path& path, std::size_t line) {
  T v{};
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": bad number '" + field + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_vector(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_double(v[i]);
  }
  return s + "]";
}

std::vector<std::size_t> read_correspondences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open correspondences file: " + path.string());
  std::vector<std::size_t> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    out.push_back(parse_number<std::size_t>(line, path, lineno));
  }
  return out;
}

void write_correspondences(const std::vector<std::size_t>& c, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (std::size_t v : c) out << v << '\n';
}

void write_match_table(const std::vector<MatchOutcome>& outcomes, const ConfigEcho& echo,
                       const std::filesystem::path& path) {
  auto out = open_out(path);
  write_echo(out, echo);
  out << "query_id,best_index,quality,best_distance\n";
  for (const auto& o : outcomes) {
    out << o.query_id << ',' << o.best_index << ',' << format_double(o.quality) << ','
        << format_double(o.best_distance) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<MatchOutcome> read_match_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open match table: " + path.string());
  std::vector<MatchOutcome> out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "query_id,best_index,quality,best_distance") {
        throw DataError(path.string() + ": missing match table header");
      }
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 4) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
    }
    MatchOutcome o;
    o.query_id = fields[0];
    o.best_index = parse_number<std::size_t>(fields[1], path, lineno);
    o.quality = parse_number<double>(fields[2], path, lineno);
    o.best_distance = parse_number<double>(fields[3], path, lineno);
    out.push_back(std::move(o));
  }
  return out;
}

void write_pr_curve(const PRCurve& curve, const ConfigEcho& echo, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_echo(out, echo);
  out << "threshold,precision,recall,f1\n";
  for (const auto& p : curve.points) {
    out << format_double(p.threshold) << ',' << format_double(p.precision) << ','
        << format_double(p.recall) << ',' << format_double(p.f1) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace mapfilter
