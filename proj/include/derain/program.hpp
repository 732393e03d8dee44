#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "derain/image.hpp"
#include "derain/toolbox.hpp"

namespace derain {

class ProgramError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered sequence of distinct tools; may be empty.
struct ToolPath {
  std::vector<ToolId> steps;

  [[nodiscard]] std::size_t size() const { return steps.size(); }
  [[nodiscard]] bool empty() const { return steps.empty(); }
  friend bool operator==(const ToolPath&, const ToolPath&) = default;
};

std::string to_string(const ToolPath& path);

/// Index of a path in the canonical enumeration for a given toolbox size.
struct PathCategory {
  int index = 0;
  friend auto operator<=>(const PathCategory&, const PathCategory&) = default;
};

/// C = sum_{j=0..k} k!/(k-j)!
int path_count(int toolbox_size);

/// All ordered paths of distinct tools drawn from the first `toolbox_size` tools,
/// sorted by length and then lexicographically by tool ordinal.
std::vector<ToolPath> enumerate_paths(int toolbox_size);

PathCategory path_to_category(const ToolPath& path, int toolbox_size);
ToolPath category_to_path(PathCategory category, int toolbox_size);

/// Per-pixel strength in [0,1], broadcast over the three channels.
class StrengthMap {
 public:
  StrengthMap() = default;
  explicit StrengthMap(Plane values);
  static StrengthMap constant(int width, int height, double value);

  [[nodiscard]] int width() const { return values_.width(); }
  [[nodiscard]] int height() const { return values_.height(); }
  [[nodiscard]] const Plane& plane() const { return values_; }
  [[nodiscard]] double at(int x, int y) const { return values_.at(x, y); }
  [[nodiscard]] double mean() const;

  friend bool operator==(const StrengthMap&, const StrengthMap&) = default;

 private:
  Plane values_;
};

struct RestorationProgram {
  ToolPath path;
  std::vector<StrengthMap> maps;
};

struct ExecutionTrace {
  /// I^(0) .. I^(L); the first entry is the executor input.
  std::vector<Image> intermediates;
};

struct ExecutionResult {
  Image output;
  ExecutionTrace trace;
};

/// One residual-scaling step: clamp01(prev + lambda * (tool_out - prev)) per pixel.
Image blend_step(const Image& prev, const Image& tool_out, const StrengthMap& lambda);
Image blend_step(const Image& prev, const Image& tool_out, double lambda);

ExecutionResult execute(const Image& input, const RestorationProgram& program,
                        const ToolConfig& cfg);

/// execute() with every strength map held at one constant.
Image execute_fixed(const Image& input, const ToolPath& path, double strength,
                    const ToolConfig& cfg);

enum class MapFormat { Png, RawF64 };

/// Writes `<json_path>` plus one map file per step beside it; map references are relative.
void save_program(const RestorationProgram& program, const std::filesystem::path& json_path,
                  MapFormat format = MapFormat::Png);
RestorationProgram load_program(const std::filesystem::path& json_path);

void save_map_f64(const Plane& plane, const std::filesystem::path& path);
Plane load_map_f64(const std::filesystem::path& path);

}  // namespace derain
