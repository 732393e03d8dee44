#include "derain/planner.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace derain {

Standardizer Standardizer::identity(int dim) {
  return Standardizer{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

Standardizer Standardizer::fit(std::span<const double> rows, int dim) {
  if (dim <= 0 || rows.empty() || rows.size() % dim != 0) {
    throw ModelError("cannot fit a standardizer on an empty or ragged sample set");
  }
  const std::size_t n = rows.size() / dim;
  Standardizer s = identity(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < dim; ++k) s.mean[k] += rows[i * dim + k];
  }
  for (double& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < dim; ++k) {
      const double d = rows[i * dim + k] - s.mean[k];
      var[k] += d * d;
    }
  }
  for (int k = 0; k < dim; ++k) s.scale[k] = std::max(1e-8, std::sqrt(var[k] / static_cast<double>(n)));
  return s;
}

SchedulerModel::SchedulerModel(int input_dim, int hidden, int toolbox_size)
    : input_norm(Standardizer::identity(input_dim)),
      input_dim_(input_dim),
      hidden_(hidden),
      toolbox_size_(toolbox_size),
      categories_(path_count(toolbox_size)) {
  if (input_dim <= 0 || hidden <= 0) throw ModelError("scheduler dimensions must be positive");
  params.assign(b2_offset() + categories_, 0.0);
}

SchedulerModel SchedulerModel::initialized(int input_dim, int hidden, int toolbox_size,
                                           std::uint64_t seed) {
  SchedulerModel m(input_dim, hidden, toolbox_size);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> init(0.0, 1.0 / std::sqrt(static_cast<double>(input_dim)));
  for (std::size_t i = m.w1_offset(); i < m.b1_offset(); ++i) m.params[i] = init(rng);
  return m;
}

SchedulerModel::Forward SchedulerModel::forward(std::span<const double> pooled) const {
  if (static_cast<int>(pooled.size()) != input_dim_) {
    throw ModelError("scheduler expects " + std::to_string(input_dim_) + " features, got " +
                     std::to_string(pooled.size()));
  }
  Forward f;
  f.input.resize(input_dim_);
  for (int k = 0; k < input_dim_; ++k) f.input[k] = input_norm.apply(k, pooled[k]);
  f.hidden.resize(hidden_);
  for (int j = 0; j < hidden_; ++j) {
    double a = params[b1_offset() + j];
    const double* w = &params[w1_offset() + static_cast<std::size_t>(j) * input_dim_];
    for (int k = 0; k < input_dim_; ++k) a += w[k] * f.input[k];
    f.hidden[j] = std::tanh(a);
  }
  f.logits.resize(categories_);
  for (int c = 0; c < categories_; ++c) {
    double a = params[b2_offset() + c];
    const double* w = &params[w2_offset() + static_cast<std::size_t>(c) * hidden_];
    for (int j = 0; j < hidden_; ++j) a += w[j] * f.hidden[j];
    f.logits[c] = a;
  }
  return f;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

ScheduleResult schedule(const SchedulerModel& model, std::span<const double> pooled) {
  const auto f = model.forward(pooled);
  ScheduleResult r;
  r.probs = softmax(f.logits);
  // max_element returns the first maximum, which is the lowest-index tie-break.
  r.category.index = static_cast<int>(std::max_element(f.logits.begin(), f.logits.end()) -
                                      f.logits.begin());
  return r;
}

ModulatorModel::ModulatorModel(int pixel_dim, int embed_dim, int toolbox_size)
    : pixel_norm(Standardizer::identity(pixel_dim)),
      pixel_dim_(pixel_dim),
      embed_dim_(embed_dim),
      toolbox_size_(toolbox_size),
      categories_(path_count(toolbox_size)) {
  if (pixel_dim <= 0 || embed_dim <= 0) throw ModelError("modulator dimensions must be positive");
  params.assign(static_cast<std::size_t>(categories_) * embed_dim_ +
                    static_cast<std::size_t>(toolbox_size_) * toolbox_size_ * head_width(),
                0.0);
}

ModulatorModel ModulatorModel::zeros(int pixel_dim, int embed_dim, int toolbox_size) {
  return ModulatorModel(pixel_dim, embed_dim, toolbox_size);
}

ModulatorModel ModulatorModel::initialized(int pixel_dim, int embed_dim, int toolbox_size,
                                           double init_strength, std::uint64_t seed) {
  if (!(init_strength > 0.0 && init_strength < 1.0)) {
    throw ModelError("initial strength must lie strictly inside (0,1)");
  }
  ModulatorModel m(pixel_dim, embed_dim, toolbox_size);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> emb(0.0, 0.5);
  std::normal_distribution<double> small(0.0, 0.05);
  for (int c = 0; c < m.categories(); ++c) {
    for (int e = 0; e < embed_dim; ++e) m.params[m.embedding_offset(c) + e] = emb(rng);
  }
  const double bias = std::log(init_strength / (1.0 - init_strength));
  for (int t = 0; t < toolbox_size; ++t) {
    for (int pos = 0; pos < toolbox_size; ++pos) {
      const std::size_t h = m.head_offset(static_cast<ToolId>(t), pos);
      for (int e = 0; e < embed_dim; ++e) m.params[h + pixel_dim + e] = small(rng);
      m.params[h + pixel_dim + embed_dim] = bias;
    }
  }
  return m;
}

std::vector<double> standardized_pixels(const ModulatorModel& model, const FeatureSet& features) {
  if (static_cast<int>(features.per_pixel.size()) != model.pixel_dim()) {
    throw ModelError("modulator expects " + std::to_string(model.pixel_dim()) +
                     " feature planes, got " + std::to_string(features.per_pixel.size()));
  }
  const std::size_t n = features.per_pixel.front().size();
  std::vector<double> out(n * model.pixel_dim());
  for (int k = 0; k < model.pixel_dim(); ++k) {
    const auto plane = features.per_pixel[k].data();
    for (std::size_t p = 0; p < n; ++p) out[k * n + p] = model.pixel_norm.apply(k, plane[p]);
  }
  return out;
}

std::vector<double> step_logits(const ModulatorModel& model, std::span<const double> pixels,
                                std::size_t pixel_count, PathCategory category, ToolId tool,
                                int position) {
  const std::size_t h = model.head_offset(tool, position);
  const std::size_t e = model.embedding_offset(category.index);
  double shared = model.params[h + model.pixel_dim() + model.embed_dim()];
  for (int k = 0; k < model.embed_dim(); ++k) {
    shared += model.params[h + model.pixel_dim() + k] * model.params[e + k];
  }
  std::vector<double> z(pixel_count, shared);
  for (int k = 0; k < model.pixel_dim(); ++k) {
    const double w = model.params[h + k];
    const double* plane = &pixels[k * pixel_count];
    for (std::size_t p = 0; p < pixel_count; ++p) z[p] += w * plane[p];
  }
  return z;
}

double squash(double logit) {
  constexpr double kEdge = 1e-12;
  return std::clamp(1.0 / (1.0 + std::exp(-logit)), kEdge, 1.0 - kEdge);
}

std::vector<StrengthMap> modulate(const ModulatorModel& model, const FeatureSet& features,
                                  PathCategory category) {
  const ToolPath path = category_to_path(category, model.toolbox_size());
  if (path.empty()) return {};
  const Plane& ref = features.per_pixel.front();
  const auto pixels = standardized_pixels(model, features);
  std::vector<StrengthMap> maps;
  maps.reserve(path.size());
  for (std::size_t s = 0; s < path.size(); ++s) {
    auto z = step_logits(model, pixels, ref.size(), category, path.steps[s], static_cast<int>(s));
    for (double& v : z) v = squash(v);
    maps.emplace_back(Plane(ref.width(), ref.height(), std::move(z)));
  }
  return maps;
}

void check_compatible(const SchedulerModel& scheduler, const ModulatorModel& modulator) {
  if (scheduler.toolbox_size() != modulator.toolbox_size()) {
    throw ModelError("scheduler and modulator were built for different toolbox sizes");
  }
  if (scheduler.input_dim() != kPooledDim || modulator.pixel_dim() != kPixelDim) {
    throw ModelError("model feature dimensions do not match the feature extractor");
  }
}

RestorationProgram plan(const SchedulerModel& scheduler, const ModulatorModel& modulator,
                        const Image& img) {
  check_compatible(scheduler, modulator);
  const FeatureSet features = extract_features(img);
  const auto sched = schedule(scheduler, features.pooled);
  RestorationProgram program;
  program.path = category_to_path(sched.category, scheduler.toolbox_size());
  program.maps = modulate(modulator, features, sched.category);
  return program;
}

AgentRun run_agent(const SchedulerModel& scheduler, const ModulatorModel& modulator,
                   const Image& img, const ToolConfig& cfg) {
  AgentRun run;
  run.program = plan(scheduler, modulator, img);
  run.category = path_to_category(run.program.path, scheduler.toolbox_size());
  auto exec = execute(img, run.program, cfg);
  run.output = std::move(exec.output);
  run.trace = std::move(exec.trace);
  return run;
}

}  // namespace derain
