#include "derain/manifest.hpp"

#include <algorithm>
#include <fstream>

namespace derain {

std::string_view degradation_name(Degradation d) {
  switch (d) {
    case Degradation::Noise: return "noise";
    case Degradation::Blur: return "blur";
    case Degradation::ColorCast: return "color";
  }
  return "unknown";
}

namespace {

Degradation degradation_from_name(const std::string& name) {
  for (auto d : {Degradation::Noise, Degradation::Blur, Degradation::ColorCast}) {
    if (degradation_name(d) == name) return d;
  }
  throw ManifestError("unknown degradation '" + name + "'");
}

}  // namespace

bool DegradationSpec::active(Degradation d) const {
  switch (d) {
    case Degradation::Noise: return noise_sigma > 0.0;
    case Degradation::Blur: return blur_sigma > 0.0;
    case Degradation::ColorCast:
      return std::any_of(color_gains.begin(), color_gains.end(), [](double g) { return g != 1.0; });
  }
  return false;
}

std::vector<Degradation> DegradationSpec::active_set() const {
  std::vector<Degradation> out;
  for (auto d : {Degradation::Noise, Degradation::Blur, Degradation::ColorCast}) {
    if (active(d)) out.push_back(d);
  }
  return out;
}

void DegradationSpec::validate() const {
  if (!(noise_sigma >= 0.0 && noise_sigma <= kMaxNoise)) {
    throw ManifestError("noise_sigma outside [0, 0.1]");
  }
  if (!(blur_sigma >= 0.0 && blur_sigma <= kMaxBlur)) {
    throw ManifestError("blur_sigma outside [0, 2.5]");
  }
  for (double g : color_gains) {
    if (!(g >= kMinGain && g <= kMaxGain)) throw ManifestError("color gain outside [0.7, 1.3]");
  }
  auto expected = active_set();
  auto order = apply_order;
  std::sort(order.begin(), order.end());
  if (order != expected) {
    throw ManifestError("apply_order must be a permutation of the active degradations");
  }
}

void to_json(nlohmann::json& j, const DegradationSpec& spec) {
  nlohmann::json order = nlohmann::json::array();
  for (auto d : spec.apply_order) order.push_back(degradation_name(d));
  j = nlohmann::json{{"noise_sigma", spec.noise_sigma},
                     {"blur_sigma", spec.blur_sigma},
                     {"color_gains", spec.color_gains},
                     {"apply_order", order}};
}

void from_json(const nlohmann::json& j, DegradationSpec& spec) {
  spec.noise_sigma = j.at("noise_sigma").get<double>();
  spec.blur_sigma = j.at("blur_sigma").get<double>();
  spec.color_gains = j.at("color_gains").get<std::array<double, 3>>();
  spec.apply_order.clear();
  for (const auto& name : j.at("apply_order")) {
    spec.apply_order.push_back(degradation_from_name(name.get<std::string>()));
  }
}

void to_json(nlohmann::json& j, const SampleRecord& r) {
  j = nlohmann::json{{"v", kManifestVersion}, {"id", r.id},     {"clean", r.clean},
                     {"degraded", r.degraded}, {"spec", r.spec}};
  j["gt_category"] = r.gt_category ? nlohmann::json(*r.gt_category) : nlohmann::json(nullptr);
  j["oracle_psnr"] = r.oracle_psnr ? nlohmann::json(*r.oracle_psnr) : nlohmann::json(nullptr);
  if (r.cfg_hash) j["cfg_hash"] = *r.cfg_hash;
}

void from_json(const nlohmann::json& j, SampleRecord& r) {
  if (j.value("v", 0) != kManifestVersion) throw ManifestError("unsupported manifest version");
  r.id = j.at("id").get<std::string>();
  r.clean = j.at("clean").get<std::string>();
  r.degraded = j.at("degraded").get<std::string>();
  r.spec = j.at("spec").get<DegradationSpec>();
  r.gt_category.reset();
  r.oracle_psnr.reset();
  r.cfg_hash.reset();
  if (j.contains("gt_category") && !j["gt_category"].is_null()) {
    r.gt_category = j["gt_category"].get<int>();
  }
  if (j.contains("oracle_psnr") && !j["oracle_psnr"].is_null()) {
    r.oracle_psnr = j["oracle_psnr"].get<double>();
  }
  if (r.gt_category.has_value() != r.oracle_psnr.has_value()) {
    throw ManifestError("record '" + r.id + "' must carry both or neither of gt_category/oracle_psnr");
  }
  if (j.contains("cfg_hash")) r.cfg_hash = j["cfg_hash"].get<std::string>();
}

std::filesystem::path Manifest::resolve(const std::string& p) const {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : dir / path;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ManifestError("cannot open manifest '" + path.string() + "'");
  Manifest m;
  m.dir = path.parent_path();
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      m.records.push_back(nlohmann::json::parse(line).get<SampleRecord>());
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ManifestError("cannot write manifest '" + path.string() + "'");
  for (const auto& r : records) os << nlohmann::json(r).dump() << "\n";
  if (!os) throw ManifestError("failed writing manifest '" + path.string() + "'");
}

}  // namespace derain
