#include "mapfilter/tensor_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include <json.hpp>

#include "mapfilter/errors.hpp"

namespace mapfilter {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

FeatureTensor::FeatureTensor(std::uint32_t w, std::uint32_t h, std::uint32_t c)
    : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, 0.0f) {}

void FeatureTensor::validate() const {
  if (width == 0 || height == 0 || channels == 0) {
    throw InvalidArgument("feature tensor has a zero dimension");
  }
  if (data.size() != size()) {
    throw InvalidArgument("feature tensor data length " + std::to_string(data.size()) +
                          " != W*H*C = " + std::to_string(size()));
  }
  for (float v : data) {
    if (!std::isfinite(v)) throw InvalidArgument("feature tensor contains a non-finite value");
  }
}

void write_tensor(const FeatureTensor& t, const std::filesystem::path& path) {
  t.validate();
  std::string buf;
  buf.reserve(kFmapHeaderBytes + 4 * t.data.size());
  buf.append(kFmapMagic, 4);
  buf.push_back(static_cast<char>(kFmapVersion));
  put_u32(buf, t.width);
  put_u32(buf, t.height);
  put_u32(buf, t.channels);
  for (float v : t.data) put_u32(buf, std::bit_cast<std::uint32_t>(v));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open tensor file: " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < 4 || std::memcmp(buf.data(), kFmapMagic, 4) != 0) {
    throw BadMagicError("bad magic in tensor file: " + path.string());
  }
  if (buf.size() < 5) throw TruncatedError("truncated header: " + path.string());
  if (buf[4] != kFmapVersion) {
    throw VersionMismatchError("unsupported FMAP version " + std::to_string(buf[4]) + " in " +
                               path.string());
  }
  if (buf.size() < kFmapHeaderBytes) throw TruncatedError("truncated header: " + path.string());

  FeatureTensor t;
  t.width = get_u32(&buf[5]);
  t.height = get_u32(&buf[9]);
  t.channels = get_u32(&buf[13]);
  const std::size_t n = t.size();
  if (buf.size() - kFmapHeaderBytes < 4 * n) {
    throw TruncatedError("payload shorter than W*H*C floats: " + path.string());
  }
  t.data.resize(n);
  const unsigned char* p = buf.data() + kFmapHeaderBytes;
  for (std::size_t i = 0; i < n; ++i) t.data[i] = std::bit_cast<float>(get_u32(p + 4 * i));
  t.validate();
  return t;
}

std::string to_string(GtMode mode) { return mode == GtMode::kFrame ? "frame" : "metric"; }

GtMode parse_gt_mode(const std::string& s) {
  if (s == "frame") return GtMode::kFrame;
  if (s == "metric") return GtMode::kMetric;
  throw InvalidArgument("unknown gt_mode '" + s + "' (expected frame|metric)");
}

void DatasetManifest::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.id).second) throw InvalidArgument("duplicate manifest id: " + e.id);
    if (gt_mode == GtMode::kMetric && !e.position) {
      throw InvalidArgument("metric-mode manifest entry without position: " + e.id);
    }
  }
}

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& e) const {
  std::filesystem::path p(e.tensor_path);
  return p.is_absolute() ? p : base_dir / p;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("unreadable manifest " + path.string() + ": " + e.what());
  }

  DatasetManifest m;
  m.base_dir = path.parent_path();
  try {
    m.gt_mode = parse_gt_mode(doc.at("gt_mode").get<std::string>());
    m.layer_name = doc.value("layer_name", std::string{});
    for (const auto& je : doc.at("entries")) {
      ManifestEntry e;
      e.id = je.at("id").get<std::string>();
      e.tensor_path = je.at("tensor_path").get<std::string>();
      if (je.contains("position") && !je.at("position").is_null()) {
        const auto& jp = je.at("position");
        if (!jp.is_array() || jp.size() != 2) {
          throw InvalidArgument("position of " + e.id + " must be [x, y]");
        }
        e.position = Position{jp[0].get<double>(), jp[1].get<double>()};
      }
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  m.validate();
  nlohmann::json doc;
  doc["gt_mode"] = to_string(m.gt_mode);
  doc["layer_name"] = m.layer_name;
  auto& entries = doc["entries"] = nlohmann::json::array();
  for (const auto& e : m.entries) {
    nlohmann::json je{{"id", e.id}, {"tensor_path", e.tensor_path}};
    if (e.position) je["position"] = {e.position->x, e.position->y};
    entries.push_back(std::move(je));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << doc.dump(1) << '\n';
}

std::vector<FeatureTensor> load_tensors(const DatasetManifest& m) {
  std::vector<FeatureTensor> out;
  out.reserve(m.entries.size());
  for (const auto& e : m.entries) out.push_back(read_tensor(m.resolve(e)));
  return out;
}

}  // namespace mapfilter
