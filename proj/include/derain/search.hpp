#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "derain/image.hpp"
#include "derain/program.hpp"
#include "derain/toolbox.hpp"

namespace derain {

struct SearchResult {
  PathCategory category;
  double score = 0.0;
  /// Full-path executions for the oracle, single tool trials for the step-wise strategies.
  int evaluations = 0;
};

/// Maps an image to a scalar; larger is better.
using QualityFn = std::function<double(const Image&)>;

/// Scores every path at strength 1 by PSNR against `clean`; ties go to higher SSIM,
/// then to the lower category index.
SearchResult exhaustive_oracle(const Image& degraded, const Image& clean, int toolbox_size,
                               const ToolConfig& cfg);

/// Strength-1 PSNR of every category, indexed by category.
std::vector<double> path_scores(const Image& degraded, const Image& clean, int toolbox_size,
                                const ToolConfig& cfg);

/// Uniform category in [0, C) drawn from a generator seeded with `seed`.
PathCategory random_policy(std::uint64_t seed, int toolbox_size = kToolCount);

struct StepwiseResult {
  RestorationProgram program;  // constant maps at strength 1
  SearchResult result;
};

/// At each step trial-applies every unused tool and keeps the best one. Stops as soon as
/// the best trial fails to improve the quality, or after `max_steps` steps.
StepwiseResult greedy_iqa(const Image& degraded, const QualityFn& quality, int toolbox_size,
                          int max_steps, const ToolConfig& cfg);

/// Greedy ranking with backtracking: a step's tool is kept only if continuing from it
/// ends above the quality the step started from. Otherwise the step is rolled back and
/// the next-ranked untried tool is attempted.
StepwiseResult rollback_replanning(const Image& degraded, const QualityFn& quality,
                                   int toolbox_size, int max_steps, const ToolConfig& cfg);

struct PairedSample {
  std::string id;
  Image degraded;
  Image clean;
};

struct StrategyOutcome {
  Image output;
  int evaluations = 0;
};

struct Strategy {
  std::string name;
  std::function<StrategyOutcome(const PairedSample&, std::size_t row)> run;
};

/// Strategy by name: baseline, random, greedy, rollback or exhaustive. The random
/// strategy draws its category from mix_seed(seed, row).
Strategy builtin_strategy(const std::string& name, const ToolConfig& cfg, std::uint64_t seed,
                          int toolbox_size = kToolCount);

struct StrategyStats {
  std::string name;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double mean_evaluations = 0.0;
  double ms_per_image = 0.0;
};

struct StrategyReport {
  std::vector<StrategyStats> strategies;

  [[nodiscard]] const StrategyStats* find(const std::string& name) const;
  [[nodiscard]] nlohmann::json to_json() const;
  [[nodiscard]] std::string to_table() const;
};

/// Runs every strategy over every sample with full-reference PSNR as the quality signal.
/// Throws std::invalid_argument on an empty sample set.
StrategyReport benchmark_strategies(const std::vector<PairedSample>& samples,
                                    const std::vector<Strategy>& strategies);

}  // namespace derain
