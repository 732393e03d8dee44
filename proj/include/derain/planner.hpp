#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "derain/features.hpp"
#include "derain/image.hpp"
#include "derain/program.hpp"
#include "derain/toolbox.hpp"

namespace derain {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchedulerHidden = 32;
inline constexpr int kEmbeddingDim = 8;

/// Per-feature affine normalization, (x - mean) / scale. Fitted on training data and
/// frozen with the model; identity by default.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer identity(int dim);
  /// `rows` holds `dim`-wide samples back to back. Scales are floored at 1e-8.
  static Standardizer fit(std::span<const double> rows, int dim);
  [[nodiscard]] double apply(int k, double x) const { return (x - mean[k]) / scale[k]; }

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

/// Two-layer classifier over pooled features: D -> tanh(hidden) -> C logits.
class SchedulerModel {
 public:
  SchedulerModel() = default;
  SchedulerModel(int input_dim, int hidden, int toolbox_size);

  /// Hidden layer drawn from N(0, 1/D); output layer zero, so the initial softmax is uniform.
  static SchedulerModel initialized(int input_dim, int hidden, int toolbox_size, std::uint64_t seed);

  [[nodiscard]] int input_dim() const { return input_dim_; }
  [[nodiscard]] int hidden() const { return hidden_; }
  [[nodiscard]] int toolbox_size() const { return toolbox_size_; }
  [[nodiscard]] int categories() const { return categories_; }

  Standardizer input_norm;

  /// Layout: W1 (hidden x D, row-major), b1, W2 (C x hidden), b2.
  std::vector<double> params;

  [[nodiscard]] std::size_t w1_offset() const { return 0; }
  [[nodiscard]] std::size_t b1_offset() const { return static_cast<std::size_t>(hidden_) * input_dim_; }
  [[nodiscard]] std::size_t w2_offset() const { return b1_offset() + hidden_; }
  [[nodiscard]] std::size_t b2_offset() const {
    return w2_offset() + static_cast<std::size_t>(categories_) * hidden_;
  }

  struct Forward {
    std::vector<double> input;   // standardized
    std::vector<double> hidden;  // tanh activations
    std::vector<double> logits;
  };
  [[nodiscard]] Forward forward(std::span<const double> pooled) const;

  friend bool operator==(const SchedulerModel&, const SchedulerModel&) = default;

 private:
  int input_dim_ = 0;
  int hidden_ = 0;
  int toolbox_size_ = 0;
  int categories_ = 0;
};

/// Softmax with max subtraction.
std::vector<double> softmax(std::span<const double> logits);

struct ScheduleResult {
  PathCategory category;
  std::vector<double> probs;
};

/// Argmax of the softmax; ties go to the lowest index.
ScheduleResult schedule(const SchedulerModel& model, std::span<const double> pooled);

/// Path-conditioned per-pixel strength generator. Every (tool, step position) pair owns an
/// affine head over [standardized pixel features, path embedding]; the logit goes through
/// a logistic squash. The path embedding is a learned C x 8 table indexed by category,
/// i.e. a linear projection of the category's one-hot code.
class ModulatorModel {
 public:
  ModulatorModel() = default;
  ModulatorModel(int pixel_dim, int embed_dim, int toolbox_size);

  /// All parameters zero: every emitted map is exactly 0.5.
  static ModulatorModel zeros(int pixel_dim, int embed_dim, int toolbox_size);
  /// Random embedding and small embedding weights, zero feature weights, head bias at the
  /// logit of `init_strength`. Initial maps are flat and close to that strength.
  static ModulatorModel initialized(int pixel_dim, int embed_dim, int toolbox_size,
                                    double init_strength, std::uint64_t seed);

  [[nodiscard]] int pixel_dim() const { return pixel_dim_; }
  [[nodiscard]] int embed_dim() const { return embed_dim_; }
  [[nodiscard]] int toolbox_size() const { return toolbox_size_; }
  [[nodiscard]] int categories() const { return categories_; }
  [[nodiscard]] int head_width() const { return pixel_dim_ + embed_dim_ + 1; }

  Standardizer pixel_norm;

  /// Layout: embedding (C x E), then heads indexed by tool * toolbox_size + position,
  /// each [pixel weights (D'), embedding weights (E), bias].
  std::vector<double> params;

  [[nodiscard]] std::size_t embedding_offset(int category) const {
    return static_cast<std::size_t>(category) * embed_dim_;
  }
  [[nodiscard]] std::size_t head_offset(ToolId tool, int position) const {
    return static_cast<std::size_t>(categories_) * embed_dim_ +
           static_cast<std::size_t>(static_cast<int>(tool) * toolbox_size_ + position) *
               head_width();
  }

  friend bool operator==(const ModulatorModel&, const ModulatorModel&) = default;

 private:
  int pixel_dim_ = 0;
  int embed_dim_ = 0;
  int toolbox_size_ = 0;
  int categories_ = 0;
};

/// Standardized per-pixel features, plane-major (k * pixels + p).
std::vector<double> standardized_pixels(const ModulatorModel& model, const FeatureSet& features);

/// Strength logit of one step for every pixel.
std::vector<double> step_logits(const ModulatorModel& model, std::span<const double> pixels,
                                std::size_t pixel_count, PathCategory category, ToolId tool,
                                int position);

/// Logistic squash kept strictly inside (0,1).
double squash(double logit);

std::vector<StrengthMap> modulate(const ModulatorModel& model, const FeatureSet& features,
                                  PathCategory category);

/// extract_features -> schedule -> modulate.
RestorationProgram plan(const SchedulerModel& scheduler, const ModulatorModel& modulator,
                        const Image& img);

struct AgentRun {
  Image output;
  RestorationProgram program;
  ExecutionTrace trace;
  PathCategory category;
};

AgentRun run_agent(const SchedulerModel& scheduler, const ModulatorModel& modulator,
                   const Image& img, const ToolConfig& cfg);

/// Throws ModelError unless the pair was built for the same toolbox and feature layout.
void check_compatible(const SchedulerModel& scheduler, const ModulatorModel& modulator);

/// Versioned little-endian container; loading rejects a different feature spec hash.
void save_model(const SchedulerModel& model, const std::filesystem::path& path);
void save_model(const ModulatorModel& model, const std::filesystem::path& path);
SchedulerModel load_scheduler(const std::filesystem::path& path);
ModulatorModel load_modulator(const std::filesystem::path& path);

}  // namespace derain
