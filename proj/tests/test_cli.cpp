#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "derain/image.hpp"
#include "derain/program.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

CliResult cli(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt";
  const std::string cmd = std::string("\"") + DERAIN_CLI_PATH + "\" " + args + " > \"" + out.string() +
                          "\" 2> \"" + (dir / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  return r;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

}  // namespace

TEST_CASE("end-to-end pipeline through the command line") {
  const auto dir = fixtures::scratch_dir("cli-e2e");
  const std::string d = dir.string();
  write_text(dir / "train.json", R"({"stage1_epochs": 40, "stage2_epochs": 3, "batch_size": 8})");

  REQUIRE(cli(dir, "synth-clean --out " + d + "/clean --count 4 --size 40 --seed 1").code == 0);
  REQUIRE(cli(dir, "gen-data --clean-dir " + d + "/clean --out " + d + "/data --name train -n 16 --crop 32 --seed 1").code == 0);
  REQUIRE(cli(dir, "gen-data --clean-dir " + d + "/clean --out " + d + "/data --name test -n 6 --crop 32 --seed 2").code == 0);
  REQUIRE(cli(dir, "oracle --manifest " + d + "/data/train.jsonl").code == 0);
  REQUIRE(cli(dir, "oracle --manifest " + d + "/data/test.jsonl --out " + d + "/labelled/test.jsonl").code == 0);

  // The relocated manifest still resolves its images.
  const std::string first_line = slurp(dir / "labelled" / "test.jsonl").substr(0, slurp(dir / "labelled" / "test.jsonl").find('\n'));
  const auto row = json::parse(first_line);
  CHECK(row.contains("gt_category"));
  CHECK(fs::exists(dir / "labelled" / row.at("degraded").get<std::string>()));

  REQUIRE(cli(dir, "train-scheduler --manifest " + d + "/data/train.jsonl --out " + d +
                       "/models/s.bin --train-config " + d + "/train.json --seed 3 --loss-curve " + d +
                       "/s_curve.json").code == 0);
  CHECK(json::parse(slurp(dir / "s_curve.json")).size() == 40);
  REQUIRE(cli(dir, "train-modulator --manifest " + d + "/data/train.jsonl --scheduler " + d +
                       "/models/s.bin --out " + d + "/models/m.bin --train-config " + d + "/train.json --seed 3").code == 0);

  const std::string models = " --scheduler " + d + "/models/s.bin --modulator " + d + "/models/m.bin";
  const auto run = cli(dir, "run --input " + d + "/data/test/test-00000_degraded.png --output " + d +
                                "/out.png --dump-program " + d + "/prog/p.json --map-format f64 --dump-trace " + d + "/trace" + models);
  REQUIRE(run.code == 0);
  const auto summary = json::parse(run.out);
  const auto program = derain::load_program(dir / "prog" / "p.json");
  CHECK(summary.at("category").get<int>() == derain::path_to_category(program.path, 3).index);
  CHECK(derain::load_image(dir / "out.png").width() == 32);

  // Replaying the dumped program reproduces the planned output.
  REQUIRE(cli(dir, "run --input " + d + "/data/test/test-00000_degraded.png --output " + d +
                       "/replay.png --program " + d + "/prog/p.json").code == 0);
  CHECK(slurp(dir / "replay.png") == slurp(dir / "out.png"));

  REQUIRE(cli(dir, "run --manifest " + d + "/labelled/test.jsonl --output " + d + "/batch" + models).code == 0);
  CHECK(fs::exists(dir / "batch" / "test-00005.png"));

  const auto ev = cli(dir, "eval --manifest " + d + "/labelled/test.jsonl" + models + " --seed 4");
  REQUIRE(ev.code == 0);
  const auto report = json::parse(ev.out);
  CHECK(report.at("samples").get<int>() == 6);
  CHECK(report.at("psnr_oracle").get<double>() >= report.at("psnr_noop").get<double>());

  const auto bench = cli(dir, "bench-strategies --manifest " + d + "/labelled/test.jsonl --strategies exhaustive,greedy,agent" + models);
  REQUIRE(bench.code == 0);
  const auto b = json::parse(bench.out);
  REQUIRE(b.at("strategies").size() == 3);
  CHECK(b["strategies"][0]["evals_per_image"].get<double>() == 16.0);
  CHECK(b["strategies"][1]["evals_per_image"].get<double>() <= 6.0);
  CHECK(cli(dir, "bench-strategies --manifest " + d + "/labelled/test.jsonl --format table").code == 0);

  const auto gc = cli(dir, "grad-check --manifest " + d + "/labelled/test.jsonl --row 2 --modulator " + d + "/models/m.bin");
  REQUIRE(gc.code == 0);
  CHECK(json::parse(gc.out).at("max_relative_error").get<double>() <= 1e-4);
}

TEST_CASE("usage errors exit with 1") {
  const auto dir = fixtures::scratch_dir("cli-usage");
  const std::string d = dir.string();
  CHECK(cli(dir, "").code == 1);
  CHECK(cli(dir, "frobnicate").code == 1);
  CHECK(cli(dir, "gen-data --out " + d).code == 1);
  CHECK(cli(dir, "gen-data --clean-dir " + d + " --out " + d + " --toolbox-size 4").code == 1);
  CHECK(cli(dir, "run --output " + d + "/x.png").code == 1);
  CHECK(cli(dir, "grad-check --manifest m.jsonl --epsilon 0.1").code == 1);
  CHECK(cli(dir, "--help").code == 0);
}

TEST_CASE("bad data exits with 2") {
  const auto dir = fixtures::scratch_dir("cli-data");
  const std::string d = dir.string();
  CHECK(cli(dir, "oracle --manifest " + d + "/missing.jsonl").code == 2);
  CHECK(cli(dir, "gen-data --clean-dir " + d + "/nowhere --out " + d + "/o").code == 2);
  write_text(dir / "broken.jsonl", "{not json\n");
  CHECK(cli(dir, "oracle --manifest " + d + "/broken.jsonl").code == 2);
  write_text(dir / "model.bin", "garbage");
  derain::save_image(fixtures::scene(16, 16, 1), dir / "in.png");
  CHECK(cli(dir, "run --input " + d + "/in.png --output " + d + "/o.png --scheduler " + d +
                     "/model.bin --modulator " + d + "/model.bin").code == 2);
  write_text(dir / "ranges.json", R"({"max_noise": 3})");
  CHECK(cli(dir, "gen-data --clean-dir " + d + " --out " + d + "/o --ranges " + d + "/ranges.json").code == 2);
}

TEST_CASE("running the oracle twice leaves the manifest unchanged") {
  const auto dir = fixtures::scratch_dir("cli-oracle");
  const std::string d = dir.string();
  REQUIRE(cli(dir, "synth-clean --out " + d + "/clean --count 3 --size 32 --seed 2").code == 0);
  REQUIRE(cli(dir, "gen-data --clean-dir " + d + "/clean --out " + d + "/data --name rows -n 8 --crop 32 --seed 2").code == 0);
  REQUIRE(cli(dir, "oracle --manifest " + d + "/data/rows.jsonl").code == 0);
  const std::string once = slurp(dir / "data" / "rows.jsonl");
  REQUIRE(cli(dir, "oracle --manifest " + d + "/data/rows.jsonl").code == 0);
  CHECK(slurp(dir / "data" / "rows.jsonl") == once);
}

TEST_CASE("a seed-7 pipeline run twice gives identical eval JSON") {
  std::vector<std::string> evals;
  for (const char* name : {"cli-seed7-a", "cli-seed7-b"}) {
    const auto dir = fixtures::scratch_dir(name);
    const std::string d = dir.string();
    write_text(dir / "train.json", R"({"stage1_epochs": 60, "stage2_epochs": 4, "batch_size": 8})");
    const std::string common = " --seed 7 --train-config " + d + "/train.json";
    REQUIRE(cli(dir, "synth-clean --out " + d + "/clean --count 4 --size 40 --seed 7").code == 0);
    REQUIRE(cli(dir, "gen-data --clean-dir " + d + "/clean --out " + d + "/data --name train -n 20 --crop 32 --seed 7").code == 0);
    REQUIRE(cli(dir, "gen-data --clean-dir " + d + "/clean --out " + d + "/data --name test -n 8 --crop 32 --seed 8").code == 0);
    REQUIRE(cli(dir, "oracle --manifest " + d + "/data/train.jsonl").code == 0);
    REQUIRE(cli(dir, "oracle --manifest " + d + "/data/test.jsonl").code == 0);
    REQUIRE(cli(dir, "train-scheduler --manifest " + d + "/data/train.jsonl --out " + d + "/s.bin" + common).code == 0);
    REQUIRE(cli(dir, "train-modulator --manifest " + d + "/data/train.jsonl --scheduler " + d + "/s.bin --out " + d +
                         "/m.bin" + common).code == 0);
    REQUIRE(cli(dir, "eval --manifest " + d + "/data/test.jsonl --scheduler " + d + "/s.bin --modulator " + d +
                         "/m.bin --out " + d + "/eval.json" + common).code == 0);
    evals.push_back(slurp(dir / "eval.json"));
  }
  CHECK_FALSE(evals[0].empty());
  CHECK(evals[0] == evals[1]);
}
