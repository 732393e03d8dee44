#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "derain/planner.hpp"
#include "fixtures.hpp"

using derain::Image;
using derain::ModulatorModel;
using derain::PathCategory;
using derain::SchedulerModel;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

ModulatorModel random_modulator(std::uint64_t seed) {
  ModulatorModel m(derain::kPixelDim, derain::kEmbeddingDim, 3);
  m.params = random_vector(m.params.size(), seed, 0.3);
  return m;
}

}  // namespace

TEST_CASE("zero scheduler is uniform and picks the empty path") {
  const SchedulerModel m(derain::kPooledDim, derain::kSchedulerHidden, 3);
  const auto pooled = random_vector(derain::kPooledDim, 1);
  const auto r = derain::schedule(m, pooled);
  CHECK(r.category.index == 0);
  REQUIRE(r.probs.size() == 16);
  for (double p : r.probs) CHECK(p == doctest::Approx(1.0 / 16.0).epsilon(1e-12));
}

TEST_CASE("initialized scheduler starts uniform") {
  const auto m = SchedulerModel::initialized(derain::kPooledDim, derain::kSchedulerHidden, 3, 7);
  const auto r = derain::schedule(m, random_vector(derain::kPooledDim, 2));
  for (double p : r.probs) CHECK(p == doctest::Approx(1.0 / 16.0).epsilon(1e-12));
  CHECK(m == SchedulerModel::initialized(derain::kPooledDim, derain::kSchedulerHidden, 3, 7));
  CHECK_FALSE(m == SchedulerModel::initialized(derain::kPooledDim, derain::kSchedulerHidden, 3, 8));
}

TEST_CASE("softmax normalizes and is shift invariant") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto logits = random_vector(16, seed, 5.0);
    const auto p = derain::softmax(logits);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    auto shifted = logits;
    for (double& v : shifted) v += 123.0;
    const auto q = derain::softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(q[i] == doctest::Approx(p[i]).epsilon(1e-9));
  }
  const std::vector<double> huge{1000.0, 0.0};
  const auto p = derain::softmax(huge);
  CHECK(std::isfinite(p[1]));
  CHECK(p[0] == 1.0);
}

TEST_CASE("argmax ignores positive logit scaling and ties go low") {
  auto m = SchedulerModel::initialized(derain::kPooledDim, derain::kSchedulerHidden, 3, 3);
  const auto w2 = random_vector(16 * derain::kSchedulerHidden, 4);
  std::copy(w2.begin(), w2.end(), m.params.begin() + static_cast<std::ptrdiff_t>(m.w2_offset()));
  const auto pooled = random_vector(derain::kPooledDim, 5);
  const int before = derain::schedule(m, pooled).category.index;
  for (std::size_t i = m.w2_offset(); i < m.params.size(); ++i) m.params[i] *= 3.5;
  CHECK(derain::schedule(m, pooled).category.index == before);

  SchedulerModel tie(derain::kPooledDim, derain::kSchedulerHidden, 3);
  tie.params[tie.b2_offset() + 4] = 2.0;
  tie.params[tie.b2_offset() + 9] = 2.0;
  CHECK(derain::schedule(tie, pooled).category.index == 4);
}

TEST_CASE("scheduler rejects a wrong feature width") {
  const SchedulerModel m(derain::kPooledDim, 4, 3);
  const std::vector<double> short_input(5, 0.0);
  CHECK_THROWS_AS((void)m.forward(short_input), derain::ModelError);
}

TEST_CASE("standardizer fit gives zero mean and unit scale") {
  const auto rows = random_vector(300, 11, 2.0);
  const auto s = derain::Standardizer::fit(rows, 3);
  for (int k = 0; k < 3; ++k) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < 100; ++i) m += s.apply(k, rows[i * 3 + k]);
    m /= 100.0;
    for (std::size_t i = 0; i < 100; ++i) v += std::pow(s.apply(k, rows[i * 3 + k]) - m, 2);
    CHECK(std::abs(m) < 1e-12);
    CHECK(v / 100.0 == doctest::Approx(1.0).epsilon(1e-9));
  }
  const std::vector<double> constant(12, 4.0);
  CHECK(derain::Standardizer::fit(constant, 2).scale[0] == 1e-8);
  CHECK_THROWS_AS(derain::Standardizer::fit(constant, 5), derain::ModelError);
}

TEST_CASE("zero modulator emits one half-strength map per step") {
  const auto m = ModulatorModel::zeros(derain::kPixelDim, derain::kEmbeddingDim, 3);
  const auto fs = derain::extract_features(fixtures::scene(12, 10, 1));
  CHECK(derain::modulate(m, fs, PathCategory{0}).empty());
  for (int c = 1; c < 16; ++c) {
    const auto maps = derain::modulate(m, fs, PathCategory{c});
    CHECK(maps.size() == derain::category_to_path(PathCategory{c}, 3).size());
    for (const auto& map : maps) {
      CHECK(map.width() == 12);
      CHECK(map.height() == 10);
      for (double v : map.plane().data()) CHECK(v == 0.5);
    }
  }
}

TEST_CASE("initialized modulator emits flat maps near its initial strength") {
  const auto m = ModulatorModel::initialized(derain::kPixelDim, derain::kEmbeddingDim, 3, 0.9, 5);
  const auto fs = derain::extract_features(fixtures::add_gaussian_noise(fixtures::scene(16, 16, 2), 0.05, 3));
  for (int c = 1; c < 16; ++c) {
    for (const auto& map : derain::modulate(m, fs, PathCategory{c})) {
      const double first = map.plane().data()[0];
      CHECK(std::abs(first - 0.9) < 0.02);
      for (double v : map.plane().data()) CHECK(v == first);
    }
  }
}

TEST_CASE("strengths stay strictly inside the unit interval") {
  CHECK(derain::squash(0.0) == 0.5);
  CHECK(derain::squash(800.0) < 1.0);
  CHECK(derain::squash(-800.0) > 0.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto m = random_modulator(seed);
    for (double& p : m.params) p *= 20.0;
    const auto fs = derain::extract_features(fixtures::uniform_noise(9, 9, seed));
    for (int c = 1; c < 16; ++c) {
      for (const auto& map : derain::modulate(m, fs, PathCategory{c})) {
        for (double v : map.plane().data()) {
          CHECK(v > 0.0);
          CHECK(v < 1.0);
        }
      }
    }
  }
}

TEST_CASE("the same tool gets different maps under different paths") {
  // Denoise alone (category 1) versus Denoise first in [Denoise, Deblur] (category 4).
  const auto m = random_modulator(9);
  const auto fs = derain::extract_features(fixtures::scene(14, 14, 4));
  const auto a = derain::modulate(m, fs, PathCategory{1});
  const auto b = derain::modulate(m, fs, PathCategory{4});
  REQUIRE(derain::category_to_path(PathCategory{4}, 3).steps[0] == derain::ToolId::Denoise);
  CHECK_FALSE(a[0] == b[0]);
}

TEST_CASE("plan composes scheduling and modulation") {
  auto sched = SchedulerModel::initialized(derain::kPooledDim, derain::kSchedulerHidden, 3, 1);
  sched.params[sched.b2_offset() + 10] = 5.0;
  const auto mod = random_modulator(2);
  const Image img = fixtures::scene(16, 16, 8);
  const auto program = derain::plan(sched, mod, img);
  CHECK(program.path == derain::category_to_path(PathCategory{10}, 3));
  const auto maps = derain::modulate(mod, derain::extract_features(img), PathCategory{10});
  REQUIRE(program.maps.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(program.maps[i] == maps[i]);

  const auto run = derain::run_agent(sched, mod, img, derain::default_config());
  CHECK(run.category.index == 10);
  CHECK(run.output == derain::execute(img, program, derain::default_config()).output);
  CHECK(run.trace.intermediates.size() == 4);
}

TEST_CASE("mismatched model pairs are rejected") {
  const SchedulerModel sched(derain::kPooledDim, 4, 2);
  const auto mod = ModulatorModel::zeros(derain::kPixelDim, derain::kEmbeddingDim, 3);
  CHECK_THROWS_AS(derain::check_compatible(sched, mod), derain::ModelError);
  CHECK_THROWS_AS(derain::plan(sched, mod, fixtures::scene(8, 8, 1)), derain::ModelError);
}

TEST_CASE("models round trip through files") {
  const auto dir = fixtures::scratch_dir("planner-io");
  auto sched = SchedulerModel::initialized(derain::kPooledDim, derain::kSchedulerHidden, 3, 12);
  sched.input_norm.mean[3] = 0.25;
  sched.input_norm.scale[3] = 4.0;
  derain::save_model(sched, dir / "s.bin");
  CHECK(derain::load_scheduler(dir / "s.bin") == sched);

  auto mod = random_modulator(13);
  mod.pixel_norm = derain::Standardizer::identity(derain::kPixelDim);
  mod.pixel_norm.mean[1] = -0.5;
  derain::save_model(mod, dir / "m.bin");
  CHECK(derain::load_modulator(dir / "m.bin") == mod);

  CHECK_THROWS_AS(derain::load_modulator(dir / "s.bin"), derain::ModelError);
  CHECK_THROWS_AS(derain::load_scheduler(dir / "m.bin"), derain::ModelError);
  CHECK_THROWS_AS(derain::load_scheduler(dir / "missing.bin"), derain::ModelError);
}

TEST_CASE("a model from another feature layout is refused") {
  const auto dir = fixtures::scratch_dir("planner-hash");
  derain::save_model(SchedulerModel(derain::kPooledDim, 4, 3), dir / "s.bin");
  std::fstream f(dir / "s.bin", std::ios::in | std::ios::out | std::ios::binary);
  // The feature hash follows the 8-byte magic, version and kind.
  f.seekp(16);
  f.put('\x5a');
  f.close();
  CHECK_THROWS_WITH_AS(derain::load_scheduler(dir / "s.bin"),
                       doctest::Contains("different feature specification"), derain::ModelError);

  {
    std::ofstream trunc(dir / "t.bin", std::ios::binary);
    trunc << "DRAGENT";
  }
  CHECK_THROWS_AS(derain::load_scheduler(dir / "t.bin"), derain::ModelError);
}
