#include "derain/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include "derain/hash.hpp"
#include "derain/metrics.hpp"
#include "derain/program.hpp"

namespace derain {

void TrainConfig::validate() const {
  if (!(stage1_lr > 0.0 && stage2_lr > 0.0 && lr_floor > 0.0)) {
    throw ConfigError("learning rates must be positive");
  }
  if (!(lr_floor < stage1_lr && lr_floor < stage2_lr)) {
    throw ConfigError("lr_floor must be below both stage learning rates");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_eps > 0.0)) {
    throw ConfigError("Adam moments must lie in [0,1) and eps must be positive");
  }
  if (batch_size <= 0 || stage1_epochs <= 0 || stage2_epochs <= 0) {
    throw ConfigError("batch size and epoch counts must be positive");
  }
  if (!(mu >= 0.0)) throw ConfigError("mu must be non-negative");
  if (!(modulator_init_strength > 0.0 && modulator_init_strength < 1.0)) {
    throw ConfigError("modulator_init_strength must lie strictly inside (0,1)");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"stage1_lr", c.stage1_lr},
                     {"stage2_lr", c.stage2_lr},
                     {"lr_floor", c.lr_floor},
                     {"schedule", "cosine"},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"adam_eps", c.adam_eps},
                     {"batch_size", c.batch_size},
                     {"stage1_epochs", c.stage1_epochs},
                     {"stage2_epochs", c.stage2_epochs},
                     {"mu", c.mu},
                     {"modulator_init_strength", c.modulator_init_strength},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  try {
    c.stage1_lr = j.value("stage1_lr", c.stage1_lr);
    c.stage2_lr = j.value("stage2_lr", c.stage2_lr);
    c.lr_floor = j.value("lr_floor", c.lr_floor);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.stage1_epochs = j.value("stage1_epochs", c.stage1_epochs);
    c.stage2_epochs = j.value("stage2_epochs", c.stage2_epochs);
    c.mu = j.value("mu", c.mu);
    c.modulator_init_strength = j.value("modulator_init_strength", c.modulator_init_strength);
    c.seed = j.value("seed", c.seed);
    if (j.contains("schedule") && j["schedule"] != "cosine") {
      throw ConfigError("only the cosine schedule is supported");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed train config: ") + e.what());
  }
  c.validate();
}

double cosine_lr(double lr0, double floor, std::size_t step, std::size_t total_steps) {
  if (total_steps <= 1) return lr0;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps - 1);
  return floor + 0.5 * (lr0 - floor) * (1.0 + std::cos(std::numbers::pi * t));
}

Adam::Adam(std::size_t size, double beta1, double beta2, double eps)
    : m_(size, 0.0), v_(size, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

namespace {

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch_size,
                                                    std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  }
  return batches;
}

std::size_t batches_per_epoch(std::size_t n, int batch_size) {
  return (n + batch_size - 1) / batch_size;
}

}  // namespace

double scheduler_loss_and_grad(const SchedulerModel& model,
                               std::span<const SchedulerSample* const> batch,
                               std::vector<double>& grad) {
  grad.assign(model.params.size(), 0.0);
  const int D = model.input_dim();
  const int H = model.hidden();
  const int C = model.categories();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  std::vector<double> dhidden(H);
  for (const SchedulerSample* s : batch) {
    if (s->label < 0 || s->label >= C) throw ModelError("training label out of range");
    const auto f = model.forward(s->pooled);
    auto probs = softmax(f.logits);
    loss += metrics::cross_entropy(probs, s->label) * inv_b;
    probs[s->label] -= 1.0;  // d(CE)/d(logits)
    std::fill(dhidden.begin(), dhidden.end(), 0.0);
    for (int c = 0; c < C; ++c) {
      const double g = probs[c] * inv_b;
      grad[model.b2_offset() + c] += g;
      const std::size_t row = model.w2_offset() + static_cast<std::size_t>(c) * H;
      for (int j = 0; j < H; ++j) {
        grad[row + j] += g * f.hidden[j];
        dhidden[j] += g * model.params[row + j];
      }
    }
    for (int j = 0; j < H; ++j) {
      const double da = dhidden[j] * (1.0 - f.hidden[j] * f.hidden[j]);
      grad[model.b1_offset() + j] += da;
      const std::size_t row = model.w1_offset() + static_cast<std::size_t>(j) * D;
      for (int k = 0; k < D; ++k) grad[row + k] += da * f.input[k];
    }
  }
  return loss;
}

Stage1Result train_stage1(const std::vector<SchedulerSample>& samples, int toolbox_size,
                          const TrainConfig& config) {
  config.validate();
  if (samples.empty()) throw ModelError("stage 1 needs at least one labelled sample");
  const int D = static_cast<int>(samples.front().pooled.size());
  const int C = path_count(toolbox_size);
  std::vector<double> rows;
  rows.reserve(samples.size() * D);
  for (const auto& s : samples) {
    if (static_cast<int>(s.pooled.size()) != D) throw ModelError("ragged feature vectors");
    if (s.label < 0 || s.label >= C) {
      throw ModelError("label " + std::to_string(s.label) + " outside [0, " + std::to_string(C) + ")");
    }
    rows.insert(rows.end(), s.pooled.begin(), s.pooled.end());
  }

  Stage1Result result;
  result.model = SchedulerModel::initialized(D, kSchedulerHidden, toolbox_size,
                                             mix_seed(config.seed, 11));
  result.model.input_norm = Standardizer::fit(rows, D);

  std::mt19937_64 rng(mix_seed(config.seed, 12));
  Adam adam(result.model.params.size(), config.beta1, config.beta2, config.adam_eps);
  const std::size_t total = batches_per_epoch(samples.size(), config.batch_size) *
                            static_cast<std::size_t>(config.stage1_epochs);
  std::size_t step = 0;
  std::vector<double> grad;
  std::vector<const SchedulerSample*> batch;
  for (int epoch = 0; epoch < config.stage1_epochs; ++epoch) {
    double epoch_loss = 0.0;
    const auto batches = epoch_batches(samples.size(), config.batch_size, rng);
    for (const auto& idx : batches) {
      batch.clear();
      for (std::size_t i : idx) batch.push_back(&samples[i]);
      epoch_loss += scheduler_loss_and_grad(result.model, batch, grad) * static_cast<double>(batch.size());
      adam.step(result.model.params, grad, cosine_lr(config.stage1_lr, config.lr_floor, step++, total));
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(samples.size()));
  }
  return result;
}

Stage2Objective::Stage2Objective(const ModulatorModel& model, std::span<const double> pixels,
                                 const Image& degraded, const Image& clean, PathCategory category,
                                 const ToolConfig& cfg, double mu, const Image* first_tool_output)
    : pixels_(pixels), clean_(clean), category_(category), mu_(mu) {
  const ToolPath path = category_to_path(category, model.toolbox_size());
  const std::size_t n = degraded.pixel_count();
  Image current = degraded;
  for (std::size_t s = 0; s < path.size(); ++s) {
    Step step{path.steps[s], static_cast<int>(s), current,
              (s == 0 && first_tool_output) ? *first_tool_output
                                            : apply_tool(path.steps[s], current, cfg)};
    if (s + 1 < path.size()) {
      auto z = step_logits(model, pixels_, n, category_, step.tool, step.position);
      for (double& v : z) v = squash(v);
      current = blend_step(step.input, step.tool_output, StrengthMap(Plane(degraded.width(), degraded.height(), std::move(z))));
    }
    steps_.push_back(std::move(step));
  }
}

double Stage2Objective::value(const ModulatorModel& model) const {
  return evaluate(model, nullptr, nullptr);
}

double Stage2Objective::value_and_grad(const ModulatorModel& model, std::vector<double>& grad,
                                       double* mean_strength) const {
  return evaluate(model, &grad, mean_strength);
}

double Stage2Objective::evaluate(const ModulatorModel& model, std::vector<double>* grad,
                                 double* mean_strength) const {
  double loss = 0.0;
  double strength_sum = 0.0;
  std::size_t strength_count = 0;
  const int D = model.pixel_dim();
  const int E = model.embed_dim();
  const std::size_t emb = model.embedding_offset(category_.index);
  for (const Step& step : steps_) {
    const std::size_t n = step.input.pixel_count();
    auto lambda = step_logits(model, pixels_, n, category_, step.tool, step.position);
    for (double& v : lambda) v = squash(v);
    Image out(step.input.width(), step.input.height());
    for (std::size_t p = 0; p < n; ++p) {
      for (int c = 0; c < Image::kChannels; ++c) {
        const std::size_t i = p * Image::kChannels + c;
        out.data()[i] = (1.0 - lambda[p]) * step.input.data()[i] + lambda[p] * step.tool_output.data()[i];
      }
    }
    out = clamp01(std::move(out));
    strength_sum += std::accumulate(lambda.begin(), lambda.end(), 0.0);
    strength_count += n;

    if (!grad) {
      loss += metrics::recon_loss(out, clean_, mu_);
      continue;
    }
    const auto lg = metrics::recon_loss_with_grad(out, clean_, mu_);
    loss += lg.value;

    std::vector<double> dz(n);
    double dz_sum = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      double dl = 0.0;
      for (int c = 0; c < Image::kChannels; ++c) {
        const std::size_t i = p * Image::kChannels + c;
        dl += lg.grad.data()[i] * (step.tool_output.data()[i] - step.input.data()[i]);
      }
      dz[p] = dl * lambda[p] * (1.0 - lambda[p]);
      dz_sum += dz[p];
    }
    auto& g = *grad;
    const std::size_t head = model.head_offset(step.tool, step.position);
    for (int k = 0; k < D; ++k) {
      const double* plane = &pixels_[k * n];
      double acc = 0.0;
      for (std::size_t p = 0; p < n; ++p) acc += dz[p] * plane[p];
      g[head + k] += acc;
    }
    for (int e = 0; e < E; ++e) {
      g[head + D + e] += dz_sum * model.params[emb + e];
      g[emb + e] += dz_sum * model.params[head + D + e];
    }
    g[head + D + E] += dz_sum;
  }
  if (mean_strength) {
    *mean_strength = strength_count ? strength_sum / static_cast<double>(strength_count) : 0.0;
  }
  return loss;
}

Stage2Result train_stage2(const std::vector<ModulatorSample>& samples,
                          const SchedulerModel& scheduler, const TrainConfig& config,
                          const ToolConfig& tools) {
  config.validate();
  tools.validate();
  if (samples.empty()) throw ModelError("stage 2 needs at least one sample");

  Stage2Result result;
  result.model = ModulatorModel::initialized(kPixelDim, kEmbeddingDim, scheduler.toolbox_size(),
                                             config.modulator_init_strength,
                                             mix_seed(config.seed, 21));
  {
    std::vector<double> rows;
    for (const auto& s : samples) {
      if (static_cast<int>(s.features.per_pixel.size()) != kPixelDim) {
        throw ModelError("sample feature planes do not match the modulator");
      }
      const std::size_t n = s.features.per_pixel.front().size();
      for (std::size_t p = 0; p < n; ++p) {
        for (int k = 0; k < kPixelDim; ++k) rows.push_back(s.features.per_pixel[k].data()[p]);
      }
    }
    result.model.pixel_norm = Standardizer::fit(rows, kPixelDim);
  }

  // The scheduler is frozen: categories, standardized features and each first-step tool
  // output are fixed for the whole stage.
  std::vector<PathCategory> categories;
  std::vector<std::vector<double>> pixels;
  std::vector<Image> first_outputs;
  for (const auto& s : samples) {
    categories.push_back(schedule(scheduler, s.features.pooled).category);
    pixels.push_back(standardized_pixels(result.model, s.features));
    const ToolPath path = category_to_path(categories.back(), scheduler.toolbox_size());
    first_outputs.push_back(path.empty() ? Image() : apply_tool(path.steps.front(), s.degraded, tools));
  }

  std::mt19937_64 rng(mix_seed(config.seed, 22));
  Adam adam(result.model.params.size(), config.beta1, config.beta2, config.adam_eps);
  const std::size_t total = batches_per_epoch(samples.size(), config.batch_size) *
                            static_cast<std::size_t>(config.stage2_epochs);
  std::size_t step = 0;
  std::vector<double> grad;
  for (int epoch = 0; epoch < config.stage2_epochs; ++epoch) {
    double epoch_loss = 0.0;
    double epoch_strength = 0.0;
    std::size_t strength_terms = 0;
    const auto batches = epoch_batches(samples.size(), config.batch_size, rng);
    for (const auto& idx : batches) {
      grad.assign(result.model.params.size(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t i : idx) {
        const Image* first = first_outputs[i].empty() ? nullptr : &first_outputs[i];
        const Stage2Objective objective(result.model, pixels[i], samples[i].degraded,
                                        samples[i].clean, categories[i], tools, config.mu, first);
        double strength = 0.0;
        batch_loss += objective.value_and_grad(result.model, grad, &strength);
        if (objective.steps() > 0) {
          epoch_strength += strength;
          ++strength_terms;
        }
      }
      const double inv_b = 1.0 / static_cast<double>(idx.size());
      for (double& g : grad) g *= inv_b;
      epoch_loss += batch_loss;
      adam.step(result.model.params, grad, cosine_lr(config.stage2_lr, config.lr_floor, step++, total));
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(samples.size()));
    result.strength_curve.push_back(strength_terms ? epoch_strength / static_cast<double>(strength_terms) : 0.0);
  }
  return result;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const ModulatorModel& model, const ModulatorSample& sample,
                           PathCategory category, const ToolConfig& tools, double epsilon,
                           double mu, const std::function<void(std::vector<double>&)>& corrupt) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) {
    throw std::invalid_argument("grad_check epsilon must lie in [1e-6, 1e-3]");
  }
  const int side = std::min({32, sample.degraded.width(), sample.degraded.height()});
  const Image degraded = crop_center(sample.degraded, side);
  const Image clean = crop_center(sample.clean, side);
  const FeatureSet features = extract_features(degraded);
  const auto pixels = standardized_pixels(model, features);

  const Stage2Objective objective(model, pixels, degraded, clean, category, tools, mu);
  std::vector<double> analytic(model.params.size(), 0.0);
  objective.value_and_grad(model, analytic);
  if (corrupt) corrupt(analytic);

  GradCheckReport report;
  ModulatorModel probe = model;
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const double original = probe.params[i];
    probe.params[i] = original + epsilon;
    const double up = objective.value(probe);
    probe.params[i] = original - epsilon;
    const double down = objective.value(probe);
    probe.params[i] = original;
    const double numeric = (up - down) / (2.0 * epsilon);
    report.max_relative_error =
        std::max(report.max_relative_error, relative_error(analytic[i], numeric));
    report.max_abs_analytic = std::max(report.max_abs_analytic, std::abs(analytic[i]));
    report.max_abs_numeric = std::max(report.max_abs_numeric, std::abs(numeric));
    ++report.checked;
  }
  return report;
}

}  // namespace derain
