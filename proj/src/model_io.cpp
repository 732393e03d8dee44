#include <fstream>
#include <string>

#include "derain/binary_io.hpp"
#include "derain/planner.hpp"

namespace derain {

namespace {

constexpr char kMagic[8] = {'D', 'R', 'A', 'G', 'E', 'N', 'T', '\0'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint32_t kKindScheduler = 1;
constexpr std::uint32_t kKindModulator = 2;

struct Header {
  std::uint32_t kind = 0;
  std::uint64_t feature_hash = 0;
  std::uint32_t toolbox_size = 0;
  std::uint32_t categories = 0;
  std::uint32_t pooled_dim = 0;
  std::uint32_t pixel_dim = 0;
  std::uint32_t hidden = 0;
  std::uint32_t embed = 0;
};

void write_header(std::ostream& os, const Header& h) {
  os.write(kMagic, sizeof(kMagic));
  binary::write(os, kFormatVersion);
  binary::write(os, h.kind);
  binary::write(os, h.feature_hash);
  binary::write(os, h.toolbox_size);
  binary::write(os, h.categories);
  binary::write(os, h.pooled_dim);
  binary::write(os, h.pixel_dim);
  binary::write(os, h.hidden);
  binary::write(os, h.embed);
}

Header read_header(std::istream& is, std::uint32_t expected_kind, const std::string& name) {
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || !std::equal(magic, magic + 8, kMagic)) {
    throw ModelError("'" + name + "' is not a model file");
  }
  if (binary::read<std::uint32_t>(is) != kFormatVersion) {
    throw ModelError("'" + name + "' has an unsupported format version");
  }
  Header h;
  h.kind = binary::read<std::uint32_t>(is);
  h.feature_hash = binary::read<std::uint64_t>(is);
  h.toolbox_size = binary::read<std::uint32_t>(is);
  h.categories = binary::read<std::uint32_t>(is);
  h.pooled_dim = binary::read<std::uint32_t>(is);
  h.pixel_dim = binary::read<std::uint32_t>(is);
  h.hidden = binary::read<std::uint32_t>(is);
  h.embed = binary::read<std::uint32_t>(is);
  if (h.kind != expected_kind) {
    throw ModelError("'" + name + "' holds a " +
                     std::string(h.kind == kKindScheduler ? "scheduler" : "modulator") +
                     " model, not the expected kind");
  }
  if (h.feature_hash != feature_spec_hash()) {
    throw ModelError("'" + name + "' was trained on a different feature specification");
  }
  return h;
}

void write_array(std::ostream& os, const std::vector<double>& v) {
  binary::write<std::uint64_t>(os, v.size());
  for (double x : v) binary::write(os, x);
}

void read_array(std::istream& is, std::vector<double>& v, const std::string& name) {
  const auto n = binary::read<std::uint64_t>(is);
  if (n != v.size()) {
    throw ModelError("'" + name + "': parameter array length " + std::to_string(n) +
                     " does not match the header (" + std::to_string(v.size()) + ")");
  }
  for (double& x : v) x = binary::read<double>(is);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ModelError("cannot write model file '" + path.string() + "'");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ModelError("cannot open model file '" + path.string() + "'");
  return is;
}

}  // namespace

void save_model(const SchedulerModel& m, const std::filesystem::path& path) {
  auto os = open_out(path);
  write_header(os, Header{kKindScheduler, feature_spec_hash(),
                          static_cast<std::uint32_t>(m.toolbox_size()),
                          static_cast<std::uint32_t>(m.categories()),
                          static_cast<std::uint32_t>(m.input_dim()), kPixelDim,
                          static_cast<std::uint32_t>(m.hidden()), kEmbeddingDim});
  write_array(os, m.input_norm.mean);
  write_array(os, m.input_norm.scale);
  write_array(os, m.params);
  if (!os) throw ModelError("failed writing model file '" + path.string() + "'");
}

void save_model(const ModulatorModel& m, const std::filesystem::path& path) {
  auto os = open_out(path);
  write_header(os, Header{kKindModulator, feature_spec_hash(),
                          static_cast<std::uint32_t>(m.toolbox_size()),
                          static_cast<std::uint32_t>(m.categories()), kPooledDim,
                          static_cast<std::uint32_t>(m.pixel_dim()), kSchedulerHidden,
                          static_cast<std::uint32_t>(m.embed_dim())});
  write_array(os, m.pixel_norm.mean);
  write_array(os, m.pixel_norm.scale);
  write_array(os, m.params);
  if (!os) throw ModelError("failed writing model file '" + path.string() + "'");
}

SchedulerModel load_scheduler(const std::filesystem::path& path) {
  auto is = open_in(path);
  try {
    const Header h = read_header(is, kKindScheduler, path.string());
    SchedulerModel m(static_cast<int>(h.pooled_dim), static_cast<int>(h.hidden),
                     static_cast<int>(h.toolbox_size));
    if (m.categories() != static_cast<int>(h.categories)) {
      throw ModelError("'" + path.string() + "': category count disagrees with toolbox size");
    }
    read_array(is, m.input_norm.mean, path.string());
    read_array(is, m.input_norm.scale, path.string());
    read_array(is, m.params, path.string());
    return m;
  } catch (const ModelError&) {
    throw;
  } catch (const std::exception& e) {
    throw ModelError("corrupt model file '" + path.string() + "': " + e.what());
  }
}

ModulatorModel load_modulator(const std::filesystem::path& path) {
  auto is = open_in(path);
  try {
    const Header h = read_header(is, kKindModulator, path.string());
    ModulatorModel m(static_cast<int>(h.pixel_dim), static_cast<int>(h.embed),
                     static_cast<int>(h.toolbox_size));
    if (m.categories() != static_cast<int>(h.categories)) {
      throw ModelError("'" + path.string() + "': category count disagrees with toolbox size");
    }
    read_array(is, m.pixel_norm.mean, path.string());
    read_array(is, m.pixel_norm.scale, path.string());
    read_array(is, m.params, path.string());
    return m;
  } catch (const ModelError&) {
    throw;
  } catch (const std::exception& e) {
    throw ModelError("corrupt model file '" + path.string() + "': " + e.what());
  }
}

}  // namespace derain
