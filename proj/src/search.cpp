#include "derain/search.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>

#include "derain/hash.hpp"
#include "derain/metrics.hpp"

namespace derain {

namespace {

void require_pair(const Image& degraded, const Image& clean) {
  if (!degraded.same_shape(clean)) {
    throw ImageError("degraded and clean images differ in size");
  }
}

// Strength-1 outputs of every category. Paths are ordered by length, so each path's
// prefix has been computed before the path itself.
std::vector<Image> all_path_outputs(const Image& degraded, int toolbox_size,
                                    const ToolConfig& cfg) {
  const auto paths = enumerate_paths(toolbox_size);
  std::vector<Image> outputs;
  outputs.reserve(paths.size());
  for (const auto& path : paths) {
    if (path.empty()) {
      outputs.push_back(degraded);
      continue;
    }
    ToolPath prefix{{path.steps.begin(), path.steps.end() - 1}};
    const Image& prev = outputs[path_to_category(prefix, toolbox_size).index];
    outputs.push_back(blend_step(prev, apply_tool(path.steps.back(), prev, cfg), 1.0));
  }
  return outputs;
}

struct StepState {
  Image image;
  ToolPath path;
  double quality = 0.0;
};

// Trial-applies each unused tool; returns candidates sorted by quality descending,
// ties by lower tool ordinal.
std::vector<StepState> rank_trials(const StepState& state, const QualityFn& quality,
                                   int toolbox_size, const ToolConfig& cfg, int& evaluations) {
  std::vector<StepState> trials;
  for (int t = 0; t < toolbox_size; ++t) {
    const auto tool = static_cast<ToolId>(t);
    if (std::find(state.path.steps.begin(), state.path.steps.end(), tool) !=
        state.path.steps.end()) {
      continue;
    }
    StepState next;
    next.image = blend_step(state.image, apply_tool(tool, state.image, cfg), 1.0);
    next.path = state.path;
    next.path.steps.push_back(tool);
    next.quality = quality(next.image);
    ++evaluations;
    trials.push_back(std::move(next));
  }
  std::stable_sort(trials.begin(), trials.end(),
                   [](const StepState& a, const StepState& b) { return a.quality > b.quality; });
  return trials;
}

StepState rollback_from(const StepState& state, const QualityFn& quality, int toolbox_size,
                        int steps_left, const ToolConfig& cfg, int& evaluations) {
  if (steps_left == 0 || static_cast<int>(state.path.size()) == toolbox_size) return state;
  auto trials = rank_trials(state, quality, toolbox_size, cfg, evaluations);
  for (auto& trial : trials) {
    StepState end = rollback_from(trial, quality, toolbox_size, steps_left - 1, cfg, evaluations);
    if (end.quality > state.quality) return end;
  }
  return state;
}

StepwiseResult finish(const StepState& state, int toolbox_size, int evaluations) {
  StepwiseResult out;
  out.program.path = state.path;
  for (std::size_t i = 0; i < state.path.size(); ++i) {
    out.program.maps.push_back(
        StrengthMap::constant(state.image.width(), state.image.height(), 1.0));
  }
  out.result.category = path_to_category(state.path, toolbox_size);
  out.result.score = state.quality;
  out.result.evaluations = evaluations;
  return out;
}

void check_budget(int toolbox_size, int max_steps) {
  if (max_steps < 0 || max_steps > toolbox_size) {
    throw std::invalid_argument("max_steps must lie in [0, toolbox_size]");
  }
}

}  // namespace

std::vector<double> path_scores(const Image& degraded, const Image& clean, int toolbox_size,
                                const ToolConfig& cfg) {
  require_pair(degraded, clean);
  const auto outputs = all_path_outputs(degraded, toolbox_size, cfg);
  std::vector<double> scores;
  scores.reserve(outputs.size());
  for (const auto& out : outputs) scores.push_back(metrics::psnr(out, clean));
  return scores;
}

SearchResult exhaustive_oracle(const Image& degraded, const Image& clean, int toolbox_size,
                               const ToolConfig& cfg) {
  require_pair(degraded, clean);
  const auto outputs = all_path_outputs(degraded, toolbox_size, cfg);
  int best = 0;
  double best_psnr = metrics::psnr(outputs[0], clean);
  double best_ssim = -2.0;  // computed lazily on the first tie
  for (int c = 1; c < static_cast<int>(outputs.size()); ++c) {
    const double p = metrics::psnr(outputs[c], clean);
    if (p > best_psnr) {
      best = c;
      best_psnr = p;
      best_ssim = -2.0;
    } else if (p == best_psnr) {
      if (best_ssim < -1.0) best_ssim = metrics::ssim(outputs[best], clean);
      const double s = metrics::ssim(outputs[c], clean);
      if (s > best_ssim) {
        best = c;
        best_ssim = s;
      }
    }
  }
  return SearchResult{PathCategory{best}, best_psnr, static_cast<int>(outputs.size())};
}

PathCategory random_policy(std::uint64_t seed, int toolbox_size) {
  std::mt19937_64 rng(mix_seed(seed, 0));
  std::uniform_int_distribution<int> dist(0, path_count(toolbox_size) - 1);
  return PathCategory{dist(rng)};
}

StepwiseResult greedy_iqa(const Image& degraded, const QualityFn& quality, int toolbox_size,
                          int max_steps, const ToolConfig& cfg) {
  check_budget(toolbox_size, max_steps);
  int evaluations = 0;
  StepState state{degraded, {}, quality(degraded)};
  for (int step = 0; step < max_steps; ++step) {
    auto trials = rank_trials(state, quality, toolbox_size, cfg, evaluations);
    if (trials.empty() || !(trials.front().quality > state.quality)) break;
    state = std::move(trials.front());
  }
  return finish(state, toolbox_size, evaluations);
}

StepwiseResult rollback_replanning(const Image& degraded, const QualityFn& quality,
                                   int toolbox_size, int max_steps, const ToolConfig& cfg) {
  check_budget(toolbox_size, max_steps);
  int evaluations = 0;
  const StepState start{degraded, {}, quality(degraded)};
  const StepState end = rollback_from(start, quality, toolbox_size, max_steps, cfg, evaluations);
  return finish(end, toolbox_size, evaluations);
}

Strategy builtin_strategy(const std::string& name, const ToolConfig& cfg, std::uint64_t seed,
                          int toolbox_size) {
  if (name == "baseline") {
    return {name, [](const PairedSample& s, std::size_t) { return StrategyOutcome{s.degraded, 0}; }};
  }
  if (name == "random") {
    return {name, [cfg, seed, toolbox_size](const PairedSample& s, std::size_t row) {
              const auto cat = random_policy(mix_seed(seed, row), toolbox_size);
              return StrategyOutcome{
                  execute_fixed(s.degraded, category_to_path(cat, toolbox_size), 1.0, cfg), 1};
            }};
  }
  if (name == "exhaustive") {
    return {name, [cfg, toolbox_size](const PairedSample& s, std::size_t) {
              const auto r = exhaustive_oracle(s.degraded, s.clean, toolbox_size, cfg);
              return StrategyOutcome{
                  execute_fixed(s.degraded, category_to_path(r.category, toolbox_size), 1.0, cfg),
                  r.evaluations};
            }};
  }
  if (name == "greedy" || name == "rollback") {
    const bool greedy = name == "greedy";
    return {name, [cfg, toolbox_size, greedy](const PairedSample& s, std::size_t) {
              const QualityFn q = [&s](const Image& img) { return metrics::psnr(img, s.clean); };
              const auto r = greedy ? greedy_iqa(s.degraded, q, toolbox_size, toolbox_size, cfg)
                                    : rollback_replanning(s.degraded, q, toolbox_size,
                                                          toolbox_size, cfg);
              return StrategyOutcome{execute_fixed(s.degraded, r.program.path, 1.0, cfg),
                                     r.result.evaluations};
            }};
  }
  throw std::invalid_argument("unknown strategy '" + name + "'");
}

const StrategyStats* StrategyReport::find(const std::string& name) const {
  for (const auto& s : strategies) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

nlohmann::json StrategyReport::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : strategies) {
    j.push_back({{"strategy", s.name},
                 {"psnr", s.mean_psnr},
                 {"ssim", s.mean_ssim},
                 {"evals_per_image", s.mean_evaluations},
                 {"ms_per_image", s.ms_per_image}});
  }
  return nlohmann::json{{"strategies", j}};
}

std::string StrategyReport::to_table() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-14s %10s %8s %12s %12s\n", "strategy", "psnr", "ssim",
                "evals/image", "ms/image");
  out += line;
  for (const auto& s : strategies) {
    std::snprintf(line, sizeof(line), "%-14s %10.4f %8.4f %12.2f %12.3f\n", s.name.c_str(),
                  s.mean_psnr, s.mean_ssim, s.mean_evaluations, s.ms_per_image);
    out += line;
  }
  return out;
}

StrategyReport benchmark_strategies(const std::vector<PairedSample>& samples,
                                    const std::vector<Strategy>& strategies) {
  if (samples.empty()) throw std::invalid_argument("benchmark needs at least one sample");
  StrategyReport report;
  for (const auto& strategy : strategies) {
    StrategyStats stats;
    stats.name = strategy.name;
    double elapsed_ms = 0.0;
    for (std::size_t row = 0; row < samples.size(); ++row) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto outcome = strategy.run(samples[row], row);
      elapsed_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
      stats.mean_psnr += metrics::psnr(outcome.output, samples[row].clean);
      stats.mean_ssim += metrics::ssim(outcome.output, samples[row].clean);
      stats.mean_evaluations += outcome.evaluations;
    }
    const auto n = static_cast<double>(samples.size());
    stats.mean_psnr /= n;
    stats.mean_ssim /= n;
    stats.mean_evaluations /= n;
    stats.ms_per_image = elapsed_ms / n;
    report.strategies.push_back(std::move(stats));
  }
  return report;
}

}  // namespace derain
