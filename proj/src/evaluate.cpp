#include "derain/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "derain/hash.hpp"
#include "derain/metrics.hpp"
#include "derain/search.hpp"

namespace derain {

std::vector<LoadedSample> load_samples(const Manifest& manifest, bool require_labels) {
  std::vector<LoadedSample> out;
  out.reserve(manifest.records.size());
  for (const auto& r : manifest.records) {
    if (require_labels && !r.gt_category) {
      throw ManifestError("record '" + r.id + "' has no ground-truth path; run the oracle first");
    }
    LoadedSample s;
    s.record = r;
    s.degraded = load_image(manifest.resolve(r.degraded));
    s.clean = load_image(manifest.resolve(r.clean));
    if (!s.degraded.same_shape(s.clean)) {
      throw ManifestError("record '" + r.id + "' pairs images of different sizes");
    }
    s.features = extract_features(s.degraded);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SchedulerSample> scheduler_samples(const std::vector<LoadedSample>& samples) {
  std::vector<SchedulerSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.record.gt_category) throw ManifestError("record '" + s.record.id + "' is unlabelled");
    out.push_back({s.features.pooled, *s.record.gt_category});
  }
  return out;
}

std::vector<ModulatorSample> modulator_samples(const std::vector<LoadedSample>& samples) {
  std::vector<ModulatorSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.degraded, s.clean, s.features});
  return out;
}

namespace {

double round4(double v) { return std::round(v * 1e4) / 1e4; }

}  // namespace

nlohmann::json EvalReport::to_json() const {
  // nlohmann::json objects keep keys sorted.
  return nlohmann::json{{"samples", samples},
                        {"distinct_labels", distinct_labels},
                        {"scheduler_accuracy", round4(scheduler_accuracy)},
                        {"majority_rate", round4(majority_rate)},
                        {"psnr_noop", round4(psnr_noop)},
                        {"psnr_oracle", round4(psnr_oracle)},
                        {"psnr_random", round4(psnr_random)},
                        {"psnr_scheduled", round4(psnr_scheduled)},
                        {"psnr_agent", round4(psnr_agent)},
                        {"ssim_noop", round4(ssim_noop)},
                        {"ssim_scheduled", round4(ssim_scheduled)},
                        {"ssim_agent", round4(ssim_agent)},
                        {"recon_fixed", round4(recon_fixed)},
                        {"recon_agent", round4(recon_agent)},
                        {"mean_strength", round4(mean_strength)},
                        {"modulation_psnr_delta", round4(modulation_psnr_delta())}};
}

EvalReport evaluate(const std::vector<LoadedSample>& samples, const SchedulerModel& scheduler,
                    const ModulatorModel& modulator, const ToolConfig& tools, std::uint64_t seed,
                    double mu) {
  if (samples.empty()) throw ManifestError("evaluation needs at least one sample");
  check_compatible(scheduler, modulator);
  const int k = scheduler.toolbox_size();

  EvalReport r;
  r.samples = static_cast<int>(samples.size());
  std::map<int, int> label_counts;
  int correct = 0;
  double strength_sum = 0.0;
  int strength_rows = 0;
  for (std::size_t row = 0; row < samples.size(); ++row) {
    const auto& s = samples[row];
    const auto sched = schedule(scheduler, s.features.pooled);
    const ToolPath path = category_to_path(sched.category, k);

    if (s.record.gt_category) {
      ++label_counts[*s.record.gt_category];
      if (*s.record.gt_category == sched.category.index) ++correct;
    }

    const Image fixed = execute_fixed(s.degraded, path, 1.0, tools);
    RestorationProgram program{path, modulate(modulator, s.features, sched.category)};
    const Image agent = execute(s.degraded, program, tools).output;
    const auto random_cat = random_policy(mix_seed(seed, row), k);
    const Image random = execute_fixed(s.degraded, category_to_path(random_cat, k), 1.0, tools);
    const auto oracle = exhaustive_oracle(s.degraded, s.clean, k, tools);

    r.psnr_noop += metrics::psnr(s.degraded, s.clean);
    r.psnr_oracle += oracle.score;
    r.psnr_random += metrics::psnr(random, s.clean);
    r.psnr_scheduled += metrics::psnr(fixed, s.clean);
    r.psnr_agent += metrics::psnr(agent, s.clean);
    r.ssim_noop += metrics::ssim(s.degraded, s.clean);
    r.ssim_scheduled += metrics::ssim(fixed, s.clean);
    r.ssim_agent += metrics::ssim(agent, s.clean);
    r.recon_fixed += metrics::recon_loss(fixed, s.clean, mu);
    r.recon_agent += metrics::recon_loss(agent, s.clean, mu);
    if (!program.maps.empty()) {
      double m = 0.0;
      for (const auto& map : program.maps) m += map.mean();
      strength_sum += m / static_cast<double>(program.maps.size());
      ++strength_rows;
    }
  }
  const double n = static_cast<double>(samples.size());
  for (double* v : {&r.psnr_noop, &r.psnr_oracle, &r.psnr_random, &r.psnr_scheduled,
                    &r.psnr_agent, &r.ssim_noop, &r.ssim_scheduled, &r.ssim_agent,
                    &r.recon_fixed, &r.recon_agent}) {
    *v /= n;
  }
  r.mean_strength = strength_rows ? strength_sum / strength_rows : 0.0;
  const int labelled = std::accumulate(label_counts.begin(), label_counts.end(), 0,
                                       [](int acc, const auto& kv) { return acc + kv.second; });
  if (labelled > 0) {
    r.scheduler_accuracy = static_cast<double>(correct) / labelled;
    int top = 0;
    for (const auto& [label, count] : label_counts) top = std::max(top, count);
    r.majority_rate = static_cast<double>(top) / labelled;
  }
  r.distinct_labels = static_cast<int>(label_counts.size());
  return r;
}

}  // namespace derain
