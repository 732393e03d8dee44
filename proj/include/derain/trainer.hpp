#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "derain/features.hpp"
#include "derain/image.hpp"
#include "derain/planner.hpp"
#include "derain/toolbox.hpp"

namespace derain {

struct TrainConfig {
  double stage1_lr = 2e-4;
  double stage2_lr = 1e-2;
  double lr_floor = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 32;
  int stage1_epochs = 1500;
  int stage2_epochs = 100;
  double mu = 0.1;
  /// Strength the untrained modulator starts from.
  double modulator_init_strength = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// floor + (lr0 - floor) * (1 + cos(pi * step / (total_steps - 1))) / 2.
double cosine_lr(double lr0, double floor, std::size_t step, std::size_t total_steps);

class Adam {
 public:
  Adam(std::size_t size, double beta1, double beta2, double eps);
  void step(std::span<double> params, std::span<const double> grad, double lr);

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  double beta1_;
  double beta2_;
  double eps_;
  std::uint64_t t_ = 0;
};

struct SchedulerSample {
  std::vector<double> pooled;
  int label = 0;
};

struct Stage1Result {
  SchedulerModel model;
  std::vector<double> loss_curve;  // per-sample mean loss, one entry per epoch
};

/// Mean cross-entropy of the scheduler over `samples` and its parameter gradient.
double scheduler_loss_and_grad(const SchedulerModel& model,
                               std::span<const SchedulerSample* const> batch,
                               std::vector<double>& grad);

Stage1Result train_stage1(const std::vector<SchedulerSample>& samples, int toolbox_size,
                          const TrainConfig& config);

struct ModulatorSample {
  Image degraded;
  Image clean;
  FeatureSet features;
};

/// Per-sample stage-2 objective: sum over steps of recon_loss(I^(l), clean). The inputs of
/// each step (I^(l-1) and the tool output) are frozen at the model the objective was built
/// with, so gradients flow only through that step's strength map.
class Stage2Objective {
 public:
  Stage2Objective(const ModulatorModel& model, std::span<const double> pixels,
                  const Image& degraded, const Image& clean, PathCategory category,
                  const ToolConfig& cfg, double mu, const Image* first_tool_output = nullptr);

  [[nodiscard]] double value(const ModulatorModel& model) const;
  /// Adds d(loss)/d(params) into `grad`; returns the loss. `mean_strength` receives the
  /// average strength over all steps when non-null.
  double value_and_grad(const ModulatorModel& model, std::vector<double>& grad,
                        double* mean_strength = nullptr) const;

  [[nodiscard]] std::size_t steps() const { return steps_.size(); }

 private:
  struct Step {
    ToolId tool;
    int position;
    Image input;
    Image tool_output;
  };
  double evaluate(const ModulatorModel& model, std::vector<double>* grad,
                  double* mean_strength) const;

  std::span<const double> pixels_;
  const Image& clean_;
  PathCategory category_;
  double mu_;
  std::vector<Step> steps_;
};

struct Stage2Result {
  ModulatorModel model;
  std::vector<double> loss_curve;     // per-sample mean of the objective, one entry per epoch
  std::vector<double> strength_curve; // mean strength per epoch
};

/// Trains the modulator against the frozen scheduler's predicted paths.
Stage2Result train_stage2(const std::vector<ModulatorSample>& samples,
                          const SchedulerModel& scheduler, const TrainConfig& config,
                          const ToolConfig& tools);

struct GradCheckReport {
  double max_relative_error = 0.0;
  int checked = 0;
  double max_abs_analytic = 0.0;
  double max_abs_numeric = 0.0;
};

/// Compares analytic stage-2 gradients with central differences on a centre crop of at
/// most 32x32. Checks every parameter (at least 50 exist for any toolbox size).
/// `corrupt` may rewrite the analytic gradient before comparison.
GradCheckReport grad_check(const ModulatorModel& model, const ModulatorSample& sample,
                           PathCategory category, const ToolConfig& tools, double epsilon,
                           double mu = 0.1,
                           const std::function<void(std::vector<double>&)>& corrupt = {});

/// |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

}  // namespace derain
