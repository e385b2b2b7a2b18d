#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mapfilter {

/// One image's activation volume for a single convolutional layer.
///
/// Storage is row-major [H][W][C] (channel fastest), so the channel vector of
/// a spatial cell is contiguous.
struct FeatureTensor {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = 0;
  std::vector<float> data;

  FeatureTensor() = default;
  FeatureTensor(std::uint32_t w, std::uint32_t h, std::uint32_t c);

  float& at(std::uint32_t row, std::uint32_t col, std::uint32_t ch) {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
  float at(std::uint32_t row, std::uint32_t col, std::uint32_t ch) const {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }

  std::size_t size() const {
    return static_cast<std::size_t>(width) * height * channels;
  }

  // Throws InvalidArgument on zero dims, size mismatch or non-finite values.
  void validate() const;

  bool operator==(const FeatureTensor&) const = default;
};

inline constexpr char kFmapMagic[4] = {'F', 'M', 'A', 'P'};
inline constexpr std::uint8_t kFmapVersion = 1;
inline constexpr std::size_t kFmapHeaderBytes = 4 + 1 + 3 * 4;

void write_tensor(const FeatureTensor& t, const std::filesystem::path& path);

// Errors: IoError, BadMagicError, VersionMismatchError, TruncatedError.
FeatureTensor read_tensor(const std::filesystem::path& path);

enum class GtMode { kFrame, kMetric };

std::string to_string(GtMode mode);
GtMode parse_gt_mode(const std::string& s);

struct Position {
  double x = 0.0;  // meters, planar
  double y = 0.0;

  bool operator==(const Position&) const = default;
};

struct ManifestEntry {
  std::string id;
  std::string tensor_path;  // relative paths resolve against the manifest dir
  std::optional<Position> position;

  bool operator==(const ManifestEntry&) const = default;
};

/// Ordered list of tensors for one traverse, in traverse order.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  GtMode gt_mode = GtMode::kFrame;
  std::string layer_name;
  // Directory the manifest was loaded from; not serialized.
  std::filesystem::path base_dir;

  void validate() const;
  std::filesystem::path resolve(const ManifestEntry& e) const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

// Loads every tensor referenced by the manifest, in order. Missing files are
// reported with their path.
std::vector<FeatureTensor> load_tensors(const DatasetManifest& m);

}  // namespace mapfilter
