#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace derain {

enum class Degradation : int { Noise = 0, Blur = 1, ColorCast = 2 };

std::string_view degradation_name(Degradation d);

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameters of one synthetic coupled degradation. A zero sigma or unit gains
/// make the corresponding degradation inactive.
struct DegradationSpec {
  static constexpr double kMaxNoise = 0.1;
  static constexpr double kMaxBlur = 2.5;
  static constexpr double kMinGain = 0.7;
  static constexpr double kMaxGain = 1.3;

  double noise_sigma = 0.0;
  double blur_sigma = 0.0;
  std::array<double, 3> color_gains{1.0, 1.0, 1.0};
  /// Permutation of exactly the active degradations.
  std::vector<Degradation> apply_order;

  [[nodiscard]] bool active(Degradation d) const;
  [[nodiscard]] std::vector<Degradation> active_set() const;
  /// Throws ManifestError on out-of-range parameters or a bad apply_order.
  void validate() const;

  friend bool operator==(const DegradationSpec&, const DegradationSpec&) = default;
};

void to_json(nlohmann::json& j, const DegradationSpec& spec);
void from_json(const nlohmann::json& j, DegradationSpec& spec);

/// One manifest row. Image paths are stored relative to the manifest's directory.
struct SampleRecord {
  std::string id;
  std::string clean;
  std::string degraded;
  DegradationSpec spec;
  std::optional<int> gt_category;
  std::optional<double> oracle_psnr;
  std::optional<std::string> cfg_hash;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

inline constexpr int kManifestVersion = 1;

void to_json(nlohmann::json& j, const SampleRecord& r);
void from_json(const nlohmann::json& j, SampleRecord& r);

struct Manifest {
  std::filesystem::path dir;  // base for relative image paths
  std::vector<SampleRecord> records;

  [[nodiscard]] std::filesystem::path resolve(const std::string& p) const;
};

/// JSON-lines, one record per line.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records);

}  // namespace derain
