#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "derain/image.hpp"
#include "derain/manifest.hpp"
#include "derain/toolbox.hpp"

namespace derain {

/// Applies the active degradations in spec.apply_order, clamping after each one.
/// Noise is drawn from a generator seeded with `seed`.
Image degrade(const Image& clean, const DegradationSpec& spec, std::uint64_t seed);

/// Bounds for the degradation sampler. Active magnitudes are drawn uniformly from
/// [min, max]; each gain is drawn from [min_gain, max_gain].
struct GenRanges {
  double min_noise = 0.01;
  double max_noise = 0.1;
  double min_blur = 0.4;
  double max_blur = 2.5;
  double min_gain = 0.8;
  double max_gain = 1.2;
  /// Probability of a pure single-degradation row, per degradation type. The remaining rows
  /// activate a uniformly drawn non-empty subset.
  double single_prob = 0.1;

  void validate() const;
};

void to_json(nlohmann::json& j, const GenRanges& r);
/// Missing keys keep their defaults; the result is validated.
void from_json(const nlohmann::json& j, GenRanges& r);

/// Samples the spec for row `row` of a dataset generated with `seed`.
DegradationSpec sample_spec(const GenRanges& ranges, std::uint64_t seed, std::uint64_t row);

struct GenRequest {
  std::filesystem::path clean_dir;
  std::filesystem::path out_dir;
  std::string name = "data";  // manifest is <out_dir>/<name>.jsonl, images under <out_dir>/<name>/
  int n = 200;
  int crop = 64;
  std::uint64_t seed = 0;
  GenRanges ranges;
};

/// Writes PNG pairs and a JSON-lines manifest; returns the manifest path.
std::filesystem::path gen_dataset(const GenRequest& request);

/// Fills gt_category/oracle_psnr via the exhaustive oracle. Pure in (records, cfg).
std::vector<SampleRecord> label_manifest(const Manifest& manifest, const ToolConfig& cfg,
                                         int toolbox_size = kToolCount);

/// Procedural clean scenes (gradients, hard-edged shapes, texture) with mild colour
/// imbalance. Deterministic in (size, seed).
Image synth_clean_image(int size, std::uint64_t seed);
void synth_clean_dir(const std::filesystem::path& dir, int count, int size, std::uint64_t seed);

}  // namespace derain
