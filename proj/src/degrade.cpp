#include "derain/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "derain/filters.hpp"
#include "derain/hash.hpp"
#include "derain/search.hpp"

namespace derain {

Image degrade(const Image& clean, const DegradationSpec& spec, std::uint64_t seed) {
  spec.validate();
  Image out = clean;
  for (Degradation d : spec.apply_order) {
    switch (d) {
      case Degradation::Blur: out = clamp01(filters::gaussian_blur(out, spec.blur_sigma)); break;
      case Degradation::Noise: {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        for (double& v : out.data()) v += noise(rng);
        out = clamp01(std::move(out));
        break;
      }
      case Degradation::ColorCast: {
        for (std::size_t i = 0; i < out.pixel_count(); ++i) {
          for (int c = 0; c < 3; ++c) out.data()[i * 3 + c] *= spec.color_gains[c];
        }
        out = clamp01(std::move(out));
        break;
      }
    }
  }
  return out;
}

void GenRanges::validate() const {
  const bool ok = 0.0 < min_noise && min_noise <= max_noise &&
                  max_noise <= DegradationSpec::kMaxNoise && 0.0 < min_blur &&
                  min_blur <= max_blur && max_blur <= DegradationSpec::kMaxBlur &&
                  DegradationSpec::kMinGain <= min_gain && min_gain <= max_gain &&
                  max_gain <= DegradationSpec::kMaxGain && single_prob >= 0.0 &&
                  3.0 * single_prob <= 1.0;
  if (!ok) throw ManifestError("degradation ranges are inconsistent or outside the allowed bounds");
}

void to_json(nlohmann::json& j, const GenRanges& r) {
  j = nlohmann::json{{"min_noise", r.min_noise},   {"max_noise", r.max_noise},
                     {"min_blur", r.min_blur},     {"max_blur", r.max_blur},
                     {"min_gain", r.min_gain},     {"max_gain", r.max_gain},
                     {"single_prob", r.single_prob}};
}

void from_json(const nlohmann::json& j, GenRanges& r) {
  GenRanges d;
  r.min_noise = j.value("min_noise", d.min_noise);
  r.max_noise = j.value("max_noise", d.max_noise);
  r.min_blur = j.value("min_blur", d.min_blur);
  r.max_blur = j.value("max_blur", d.max_blur);
  r.min_gain = j.value("min_gain", d.min_gain);
  r.max_gain = j.value("max_gain", d.max_gain);
  r.single_prob = j.value("single_prob", d.single_prob);
  r.validate();
}

DegradationSpec sample_spec(const GenRanges& ranges, std::uint64_t seed, std::uint64_t row) {
  ranges.validate();
  std::mt19937_64 rng(mix_seed(seed, row));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::array<bool, 3> on{};
  const double u = unit(rng);
  if (u < 3.0 * ranges.single_prob) {
    on[static_cast<int>(u / ranges.single_prob)] = true;
  } else {
    // Uniform over the seven non-empty subsets: every row carries some residual degradation.
    const int mask = 1 + std::min(6, static_cast<int>(unit(rng) * 7.0));
    for (int d = 0; d < 3; ++d) on[d] = (mask >> d) & 1;
  }

  DegradationSpec spec;
  // Every draw happens regardless of activation so one row's stream layout is fixed.
  const double noise = ranges.min_noise + (ranges.max_noise - ranges.min_noise) * unit(rng);
  const double blur = ranges.min_blur + (ranges.max_blur - ranges.min_blur) * unit(rng);
  std::array<double, 3> gains{};
  for (double& g : gains) g = ranges.min_gain + (ranges.max_gain - ranges.min_gain) * unit(rng);
  if (on[0]) spec.noise_sigma = noise;
  if (on[1]) spec.blur_sigma = blur;
  if (on[2]) spec.color_gains = gains;

  spec.apply_order = spec.active_set();
  std::shuffle(spec.apply_order.begin(), spec.apply_order.end(), rng);
  return spec;
}

namespace {

std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(dir)) {
    throw ManifestError("clean directory '" + dir.string() + "' does not exist");
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ManifestError("clean directory '" + dir.string() + "' has no PNG images");
  return files;
}

std::string row_id(const std::string& name, int row) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", row);
  return name + "-" + buf;
}

}  // namespace

std::filesystem::path gen_dataset(const GenRequest& req) {
  if (req.n <= 0) throw ManifestError("gen_dataset: n must be positive");
  if (req.crop < kMinImageSide) throw ManifestError("gen_dataset: crop must be at least 8");
  req.ranges.validate();
  const auto sources = list_pngs(req.clean_dir);

  const auto image_dir = req.out_dir / req.name;
  std::filesystem::create_directories(image_dir);

  std::vector<SampleRecord> records;
  records.reserve(req.n);
  for (int row = 0; row < req.n; ++row) {
    const std::uint64_t row_seed = mix_seed(req.seed, static_cast<std::uint64_t>(row));
    std::mt19937_64 pick(mix_seed(row_seed, 1));
    std::uniform_int_distribution<std::size_t> which(0, sources.size() - 1);
    const Image clean = crop_center(load_image(sources[which(pick)]), req.crop);

    SampleRecord r;
    r.id = row_id(req.name, row);
    r.spec = sample_spec(req.ranges, req.seed, static_cast<std::uint64_t>(row));
    const Image degraded = degrade(clean, r.spec, mix_seed(row_seed, 2));
    r.clean = req.name + "/" + r.id + "_clean.png";
    r.degraded = req.name + "/" + r.id + "_degraded.png";
    save_image(clean, req.out_dir / r.clean);
    save_image(degraded, req.out_dir / r.degraded);
    records.push_back(std::move(r));
  }
  const auto manifest_path = req.out_dir / (req.name + ".jsonl");
  write_manifest(manifest_path, records);
  return manifest_path;
}

std::vector<SampleRecord> label_manifest(const Manifest& manifest, const ToolConfig& cfg,
                                         int toolbox_size) {
  const std::string hash = config_hash(cfg);
  std::vector<SampleRecord> out;
  out.reserve(manifest.records.size());
  for (const auto& rec : manifest.records) {
    SampleRecord r = rec;
    const Image degraded = load_image(manifest.resolve(r.degraded));
    const Image clean = load_image(manifest.resolve(r.clean));
    const auto best = exhaustive_oracle(degraded, clean, toolbox_size, cfg);
    r.gt_category = best.category.index;
    r.oracle_psnr = best.score;
    r.cfg_hash = hash;
    out.push_back(std::move(r));
  }
  return out;
}

Image synth_clean_image(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto color = [&](double sat) {
    const double base = 0.2 + 0.6 * unit(rng);
    std::array<double, 3> c{};
    for (double& v : c) v = std::clamp(base + sat * (unit(rng) - 0.5), 0.02, 0.98);
    return c;
  };

  Image img(size, size);
  const auto c0 = color(0.2);
  const auto c1 = color(0.2);
  const double angle = 2.0 * std::numbers::pi * unit(rng);
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double t = std::clamp(0.5 + ((x - size / 2.0) * dx + (y - size / 2.0) * dy) / size,
                                  0.0, 1.0);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = (1.0 - t) * c0[c] + t * c1[c];
    }
  }

  const int shapes = 6 + static_cast<int>(unit(rng) * 8);
  for (int s = 0; s < shapes; ++s) {
    const auto col = color(0.5);
    const double cx = unit(rng) * size;
    const double cy = unit(rng) * size;
    const double rx = (0.06 + 0.25 * unit(rng)) * size;
    const double ry = (0.06 + 0.25 * unit(rng)) * size;
    const int kind = static_cast<int>(unit(rng) * 3);
    const double freq = 0.6 + 1.2 * unit(rng);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double u = (x - cx) / rx;
        const double v = (y - cy) / ry;
        bool inside = false;
        switch (kind) {
          case 0: inside = std::abs(u) <= 1.0 && std::abs(v) <= 1.0; break;
          case 1: inside = u * u + v * v <= 1.0; break;
          default:
            inside = std::abs(u) <= 1.0 && std::abs(v) <= 1.0 && std::sin(freq * x + 0.3 * y) > 0.0;
        }
        if (inside) {
          for (int c = 0; c < 3; ++c) img.at(x, y, c) = col[c];
        }
      }
    }
  }

  const double amp = 0.04 * unit(rng);
  const double fx = 0.05 + 0.3 * unit(rng);
  const double fy = 0.05 + 0.3 * unit(rng);
  const double phase = 2.0 * std::numbers::pi * unit(rng);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double t = amp * std::sin(fx * x + fy * y + phase);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) += t;
    }
  }

  // Pull channel means partly together: natural scenes are roughly, not exactly, gray-world.
  const double pull = 0.4 + 0.5 * unit(rng);
  std::array<double, 3> mean{};
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) mean[c] += img.data()[i * 3 + c];
  }
  const double global = (mean[0] + mean[1] + mean[2]) / 3.0;
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) img.data()[i * 3 + c] *= std::pow(global / mean[c], pull);
  }
  return clamp01(std::move(img));
}

void synth_clean_dir(const std::filesystem::path& dir, int count, int size, std::uint64_t seed) {
  if (count <= 0) throw ManifestError("synth_clean_dir: count must be positive");
  if (size < kMinImageSide) throw ManifestError("synth_clean_dir: size must be at least 8");
  std::filesystem::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene-%04d.png", i);
    save_image(synth_clean_image(size, mix_seed(seed, static_cast<std::uint64_t>(i))), dir / name);
  }
}

}  // namespace derain
