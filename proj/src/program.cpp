#include "derain/program.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "derain/binary_io.hpp"

namespace derain {

namespace {

void check_toolbox_size(int toolbox_size) {
  if (toolbox_size < 1 || toolbox_size > kToolCount) {
    throw ProgramError("toolbox size must lie in [1," + std::to_string(kToolCount) + "], got " +
                       std::to_string(toolbox_size));
  }
}

void extend(ToolPath& prefix, int toolbox_size, std::vector<ToolPath>& out) {
  out.push_back(prefix);
  if (static_cast<int>(prefix.size()) == toolbox_size) return;
  for (int t = 0; t < toolbox_size; ++t) {
    const auto tool = static_cast<ToolId>(t);
    if (std::find(prefix.steps.begin(), prefix.steps.end(), tool) != prefix.steps.end()) continue;
    prefix.steps.push_back(tool);
    extend(prefix, toolbox_size, out);
    prefix.steps.pop_back();
  }
}

const std::vector<ToolPath>& cached_paths(int toolbox_size) {
  static const std::array<std::vector<ToolPath>, kToolCount> cache = [] {
    std::array<std::vector<ToolPath>, kToolCount> all;
    for (int k = 1; k <= kToolCount; ++k) all[k - 1] = enumerate_paths(k);
    return all;
  }();
  check_toolbox_size(toolbox_size);
  return cache[toolbox_size - 1];
}

const char* const kMagicF64 = "DRMAPF64";

}  // namespace

std::string to_string(const ToolPath& path) {
  std::string s = "[";
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) s += ",";
    s += tool_name(path.steps[i]);
  }
  return s + "]";
}

int path_count(int toolbox_size) {
  check_toolbox_size(toolbox_size);
  int total = 0;
  int arrangements = 1;
  for (int j = 0; j <= toolbox_size; ++j) {
    total += arrangements;
    arrangements *= toolbox_size - j;
  }
  return total;
}

std::vector<ToolPath> enumerate_paths(int toolbox_size) {
  check_toolbox_size(toolbox_size);
  std::vector<ToolPath> out;
  ToolPath prefix;
  extend(prefix, toolbox_size, out);
  std::stable_sort(out.begin(), out.end(), [](const ToolPath& a, const ToolPath& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return std::lexicographical_compare(
        a.steps.begin(), a.steps.end(), b.steps.begin(), b.steps.end(),
        [](ToolId x, ToolId y) { return static_cast<int>(x) < static_cast<int>(y); });
  });
  return out;
}

PathCategory path_to_category(const ToolPath& path, int toolbox_size) {
  const auto& paths = cached_paths(toolbox_size);
  const auto it = std::find(paths.begin(), paths.end(), path);
  if (it == paths.end()) {
    throw ProgramError("path " + to_string(path) + " is not valid for toolbox size " +
                       std::to_string(toolbox_size));
  }
  return PathCategory{static_cast<int>(it - paths.begin())};
}

ToolPath category_to_path(PathCategory category, int toolbox_size) {
  const auto& paths = cached_paths(toolbox_size);
  if (category.index < 0 || category.index >= static_cast<int>(paths.size())) {
    throw ProgramError("category " + std::to_string(category.index) + " out of range for C = " +
                       std::to_string(paths.size()));
  }
  return paths[category.index];
}

StrengthMap::StrengthMap(Plane values) : values_(std::move(values)) {
  for (double v : values_.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ProgramError("strength values must lie in [0,1]");
  }
}

StrengthMap StrengthMap::constant(int width, int height, double value) {
  return StrengthMap(Plane(width, height, value));
}

double StrengthMap::mean() const {
  const auto d = values_.data();
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

// (1-l)*prev + l*tool is the residual update prev + l*(tool - prev) written so that
// l = 0 and l = 1 reproduce their endpoints bit-exactly.
Image blend_step(const Image& prev, const Image& tool_out, const StrengthMap& lambda) {
  if (lambda.width() != prev.width() || lambda.height() != prev.height()) {
    throw ProgramError("strength map " + std::to_string(lambda.width()) + "x" +
                       std::to_string(lambda.height()) + " does not match image " +
                       std::to_string(prev.width()) + "x" + std::to_string(prev.height()));
  }
  Image out(prev.width(), prev.height());
  const auto lam = lambda.plane().data();
  for (std::size_t p = 0; p < prev.pixel_count(); ++p) {
    const double l = lam[p];
    for (int c = 0; c < Image::kChannels; ++c) {
      const std::size_t i = p * Image::kChannels + c;
      out.data()[i] = (1.0 - l) * prev.data()[i] + l * tool_out.data()[i];
    }
  }
  return clamp01(std::move(out));
}

Image blend_step(const Image& prev, const Image& tool_out, double lambda) {
  Image out(prev.width(), prev.height());
  for (std::size_t i = 0; i < prev.size(); ++i) {
    out.data()[i] = (1.0 - lambda) * prev.data()[i] + lambda * tool_out.data()[i];
  }
  return clamp01(std::move(out));
}

ExecutionResult execute(const Image& input, const RestorationProgram& program,
                        const ToolConfig& cfg) {
  if (program.maps.size() != program.path.size()) {
    throw ProgramError("program has " + std::to_string(program.path.size()) + " steps but " +
                       std::to_string(program.maps.size()) + " strength maps");
  }
  for (const auto& m : program.maps) {
    if (m.width() != input.width() || m.height() != input.height()) {
      throw ProgramError("strength map dimensions do not match the input image");
    }
  }
  ExecutionResult result;
  result.trace.intermediates.reserve(program.path.size() + 1);
  result.trace.intermediates.push_back(input);
  for (std::size_t step = 0; step < program.path.size(); ++step) {
    const Image& prev = result.trace.intermediates.back();
    const Image tool_out = apply_tool(program.path.steps[step], prev, cfg);
    result.trace.intermediates.push_back(blend_step(prev, tool_out, program.maps[step]));
  }
  result.output = result.trace.intermediates.back();
  return result;
}

Image execute_fixed(const Image& input, const ToolPath& path, double strength,
                    const ToolConfig& cfg) {
  if (!(strength >= 0.0 && strength <= 1.0)) {
    throw ProgramError("fixed strength must lie in [0,1]");
  }
  Image current = input;
  for (ToolId tool : path.steps) {
    const Image tool_out = apply_tool(tool, current, cfg);
    current = blend_step(current, tool_out, strength);
  }
  return current;
}

void save_map_f64(const Plane& plane, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ProgramError("cannot write map file '" + path.string() + "'");
  os.write(kMagicF64, 8);
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(plane.width()));
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(plane.height()));
  for (double v : plane.data()) binary::write<double>(os, v);
  if (!os) throw ProgramError("failed writing map file '" + path.string() + "'");
}

Plane load_map_f64(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ProgramError("cannot open map file '" + path.string() + "'");
  char magic[8];
  if (!is.read(magic, 8) || std::string(magic, 8) != kMagicF64) {
    throw ProgramError("'" + path.string() + "' is not a raw f64 strength map");
  }
  try {
    const auto w = static_cast<int>(binary::read<std::uint32_t>(is));
    const auto h = static_cast<int>(binary::read<std::uint32_t>(is));
    std::vector<double> data(static_cast<std::size_t>(w) * h);
    for (double& v : data) v = binary::read<double>(is);
    return Plane(w, h, std::move(data));
  } catch (const std::runtime_error& e) {
    throw ProgramError("corrupt map file '" + path.string() + "': " + e.what());
  }
}

void save_program(const RestorationProgram& program, const std::filesystem::path& json_path,
                  MapFormat format) {
  if (program.maps.size() != program.path.size()) {
    throw ProgramError("program has mismatched path and map counts");
  }
  nlohmann::json j;
  j["path"] = nlohmann::json::array();
  for (ToolId t : program.path.steps) j["path"].push_back(tool_name(t));
  j["maps"] = nlohmann::json::array();
  const auto dir = json_path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  const auto stem = json_path.stem().string();
  for (std::size_t i = 0; i < program.maps.size(); ++i) {
    const std::string name = stem + "_map" + std::to_string(i) +
                             (format == MapFormat::Png ? ".png" : ".f64");
    if (format == MapFormat::Png) {
      save_plane_png(program.maps[i].plane(), dir / name);
    } else {
      save_map_f64(program.maps[i].plane(), dir / name);
    }
    j["maps"].push_back(name);
  }
  std::ofstream os(json_path);
  if (!os) throw ProgramError("cannot write program file '" + json_path.string() + "'");
  os << j.dump(2) << "\n";
}

RestorationProgram load_program(const std::filesystem::path& json_path) {
  std::ifstream is(json_path);
  if (!is) throw ProgramError("cannot open program file '" + json_path.string() + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ProgramError("malformed program JSON: " + std::string(e.what()));
  }
  RestorationProgram program;
  for (const auto& name : j.at("path")) {
    const auto tool = tool_from_name(name.get<std::string>());
    if (!tool) throw ProgramError("unknown tool '" + name.get<std::string>() + "'");
    program.path.steps.push_back(*tool);
  }
  // Rejects duplicates and unknown orderings the same way the enumerator would.
  path_to_category(program.path, kToolCount);
  const auto dir = json_path.parent_path();
  for (const auto& ref : j.at("maps")) {
    const std::filesystem::path p = dir / ref.get<std::string>();
    Plane plane = p.extension() == ".png" ? load_plane_png(p) : load_map_f64(p);
    program.maps.emplace_back(std::move(plane));
  }
  if (program.maps.size() != program.path.size()) {
    throw ProgramError("program file lists a different number of maps than steps");
  }
  return program;
}

}  // namespace derain
