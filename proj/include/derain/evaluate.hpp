#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "derain/features.hpp"
#include "derain/manifest.hpp"
#include "derain/planner.hpp"
#include "derain/trainer.hpp"

namespace derain {

struct LoadedSample {
  SampleRecord record;
  Image degraded;
  Image clean;
  FeatureSet features;
};

/// Loads every image pair and extracts features. With `require_labels`, a row without a
/// ground-truth category is an error.
std::vector<LoadedSample> load_samples(const Manifest& manifest, bool require_labels);

std::vector<SchedulerSample> scheduler_samples(const std::vector<LoadedSample>& samples);
std::vector<ModulatorSample> modulator_samples(const std::vector<LoadedSample>& samples);

/// Held-out comparison of the learned planner against reference policies.
struct EvalReport {
  int samples = 0;
  int distinct_labels = 0;
  double scheduler_accuracy = 0.0;
  double majority_rate = 0.0;  // frequency of the most common ground-truth label

  double psnr_noop = 0.0;
  double psnr_oracle = 0.0;
  double psnr_random = 0.0;
  double psnr_scheduled = 0.0;  // learned path, strength 1
  double psnr_agent = 0.0;      // learned path, learned maps

  double ssim_noop = 0.0;
  double ssim_scheduled = 0.0;
  double ssim_agent = 0.0;

  double recon_fixed = 0.0;  // scheduled path, strength 1
  double recon_agent = 0.0;
  double mean_strength = 0.0;

  [[nodiscard]] double modulation_psnr_delta() const { return psnr_agent - psnr_scheduled; }
  /// Sorted keys, values rounded to four decimals.
  [[nodiscard]] nlohmann::json to_json() const;
};

EvalReport evaluate(const std::vector<LoadedSample>& samples, const SchedulerModel& scheduler,
                    const ModulatorModel& modulator, const ToolConfig& tools, std::uint64_t seed,
                    double mu = 0.1);

}  // namespace derain
