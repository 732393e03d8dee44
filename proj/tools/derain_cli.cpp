// derain: command-line driver for the restoration-agent pipeline.
//
//   synth-clean -> gen-data -> oracle -> train-scheduler -> train-modulator -> eval / run
//
// Exit codes: 0 success, 1 usage error, 2 data or model error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "derain/degrade.hpp"
#include "derain/evaluate.hpp"
#include "derain/manifest.hpp"
#include "derain/metrics.hpp"
#include "derain/planner.hpp"
#include "derain/program.hpp"
#include "derain/search.hpp"
#include "derain/toolbox.hpp"
#include "derain/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct Options {
  std::uint64_t seed = 0;
  std::string tool_config;
  std::string train_config;
  int toolbox_size = derain::kToolCount;

  // synth-clean / gen-data
  std::string clean_dir;
  std::string out;
  std::string name = "data";
  int count = 64;
  int size = 64;
  int n = 200;
  int crop = 64;

  // oracle / train / eval / bench / run
  std::string manifest;
  std::string scheduler;
  std::string modulator;
  std::string input;
  std::string output;
  std::string program;
  std::string dump_program;
  std::string dump_trace;
  std::string map_format = "png";
  std::string format = "json";
  std::string curve;
  std::string ranges;
  std::vector<std::string> strategies{"baseline", "random", "greedy", "rollback", "exhaustive"};

  // grad-check
  int row = 0;
  double epsilon = 1e-4;
  double threshold = 1e-4;
};

derain::ToolConfig load_tool_config(const Options& o) {
  if (o.tool_config.empty()) return derain::default_config();
  std::ifstream is(o.tool_config);
  if (!is) throw derain::ConfigError("cannot open tool config '" + o.tool_config + "'");
  return json::parse(is).get<derain::ToolConfig>();
}

derain::TrainConfig load_train_config(const Options& o) {
  derain::TrainConfig cfg;
  if (!o.train_config.empty()) {
    std::ifstream is(o.train_config);
    if (!is) throw derain::ConfigError("cannot open train config '" + o.train_config + "'");
    cfg = json::parse(is).get<derain::TrainConfig>();
  }
  cfg.seed = o.seed;
  return cfg;
}

void echo_config(const std::string& command, json resolved) {
  resolved["command"] = command;
  std::cerr << resolved.dump() << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw derain::ManifestError("cannot write '" + path.string() + "'");
  os << text;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
  }
}

// Image paths stay relative to the manifest; moving the manifest rebases them.
std::vector<derain::SampleRecord> rebase(std::vector<derain::SampleRecord> records,
                                         const fs::path& from_dir, const fs::path& to_dir) {
  if (fs::weakly_canonical(from_dir.empty() ? "." : from_dir) ==
      fs::weakly_canonical(to_dir.empty() ? "." : to_dir)) {
    return records;
  }
  auto move_one = [&](std::string& p) {
    const fs::path abs = fs::path(p).is_absolute() ? fs::path(p) : from_dir / p;
    p = fs::relative(fs::weakly_canonical(abs), fs::weakly_canonical(to_dir.empty() ? "." : to_dir))
            .generic_string();
  };
  for (auto& r : records) {
    move_one(r.clean);
    move_one(r.degraded);
  }
  return records;
}

int cmd_synth_clean(const Options& o) {
  echo_config("synth-clean", {{"out", o.out}, {"count", o.count}, {"size", o.size}, {"seed", o.seed}});
  derain::synth_clean_dir(o.out, o.count, o.size, o.seed);
  return 0;
}

int cmd_gen_data(const Options& o) {
  derain::GenRequest req;
  req.clean_dir = o.clean_dir;
  req.out_dir = o.out;
  req.name = o.name;
  req.n = o.n;
  req.crop = o.crop;
  req.seed = o.seed;
  if (!o.ranges.empty()) {
    std::ifstream is(o.ranges);
    if (!is) throw derain::ConfigError("cannot open ranges file '" + o.ranges + "'");
    req.ranges = json::parse(is).get<derain::GenRanges>();
  }
  echo_config("gen-data", {{"clean_dir", o.clean_dir}, {"out", o.out}, {"name", o.name},
                           {"n", o.n}, {"crop", o.crop}, {"seed", o.seed}, {"ranges", req.ranges}});
  const auto path = derain::gen_dataset(req);
  std::cout << path.string() << "\n";
  return 0;
}

int cmd_oracle(const Options& o) {
  const auto tools = load_tool_config(o);
  const fs::path out = o.out.empty() ? fs::path(o.manifest) : fs::path(o.out);
  echo_config("oracle", {{"manifest", o.manifest}, {"out", out.string()}, {"tool_config", tools},
                         {"tool_config_hash", derain::config_hash(tools)},
                         {"toolbox_size", o.toolbox_size}});
  const auto manifest = derain::read_manifest(o.manifest);
  auto labelled = derain::label_manifest(manifest, tools, o.toolbox_size);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  derain::write_manifest(out, rebase(std::move(labelled), manifest.dir, out.parent_path()));
  return 0;
}

int cmd_train_scheduler(const Options& o) {
  const auto cfg = load_train_config(o);
  echo_config("train-scheduler", {{"manifest", o.manifest}, {"out", o.out}, {"train_config", cfg},
                                  {"toolbox_size", o.toolbox_size}});
  const auto samples = derain::load_samples(derain::read_manifest(o.manifest), true);
  const auto result = derain::train_stage1(derain::scheduler_samples(samples), o.toolbox_size, cfg);
  if (fs::path(o.out).has_parent_path()) fs::create_directories(fs::path(o.out).parent_path());
  derain::save_model(result.model, o.out);
  if (!o.curve.empty()) write_text(o.curve, json(result.loss_curve).dump() + "\n");
  std::cerr << "stage 1 loss " << result.loss_curve.front() << " -> " << result.loss_curve.back()
            << "\n";
  return 0;
}

int cmd_train_modulator(const Options& o) {
  const auto cfg = load_train_config(o);
  const auto tools = load_tool_config(o);
  echo_config("train-modulator", {{"manifest", o.manifest}, {"scheduler", o.scheduler},
                                  {"out", o.out}, {"train_config", cfg}, {"tool_config", tools}});
  const auto scheduler = derain::load_scheduler(o.scheduler);
  const auto samples = derain::load_samples(derain::read_manifest(o.manifest), false);
  const auto result = derain::train_stage2(derain::modulator_samples(samples), scheduler, cfg, tools);
  if (fs::path(o.out).has_parent_path()) fs::create_directories(fs::path(o.out).parent_path());
  derain::save_model(result.model, o.out);
  if (!o.curve.empty()) {
    write_text(o.curve, json{{"loss", result.loss_curve}, {"strength", result.strength_curve}}.dump() + "\n");
  }
  std::cerr << "stage 2 loss " << result.loss_curve.front() << " -> " << result.loss_curve.back()
            << "\n";
  return 0;
}

void dump_trace(const derain::ExecutionTrace& trace, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < trace.intermediates.size(); ++i) {
    derain::save_image(trace.intermediates[i], dir / ("step" + std::to_string(i) + ".png"));
  }
}

int cmd_run(const Options& o) {
  const auto tools = load_tool_config(o);
  echo_config("run", {{"input", o.input}, {"output", o.output}, {"manifest", o.manifest},
                      {"program", o.program}, {"scheduler", o.scheduler},
                      {"modulator", o.modulator}, {"dump_program", o.dump_program},
                      {"dump_trace", o.dump_trace}, {"map_format", o.map_format},
                      {"tool_config", tools}});
  const auto map_format = o.map_format == "f64" ? derain::MapFormat::RawF64 : derain::MapFormat::Png;

  if (!o.program.empty()) {
    const auto program = derain::load_program(o.program);
    const auto result = derain::execute(derain::load_image(o.input), program, tools);
    derain::save_image(result.output, o.output);
    if (!o.dump_trace.empty()) dump_trace(result.trace, o.dump_trace);
    return 0;
  }

  const auto scheduler = derain::load_scheduler(o.scheduler);
  const auto modulator = derain::load_modulator(o.modulator);
  if (!o.manifest.empty()) {
    const auto manifest = derain::read_manifest(o.manifest);
    fs::create_directories(o.output);
    for (const auto& r : manifest.records) {
      const auto run = derain::run_agent(scheduler, modulator,
                                         derain::load_image(manifest.resolve(r.degraded)), tools);
      derain::save_image(run.output, fs::path(o.output) / (r.id + ".png"));
      if (!o.dump_program.empty()) {
        fs::create_directories(o.dump_program);
        derain::save_program(run.program, fs::path(o.dump_program) / (r.id + ".json"), map_format);
      }
    }
    return 0;
  }

  const auto run = derain::run_agent(scheduler, modulator, derain::load_image(o.input), tools);
  derain::save_image(run.output, o.output);
  if (!o.dump_program.empty()) {
    const fs::path p(o.dump_program);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    derain::save_program(run.program, p, map_format);
  }
  if (!o.dump_trace.empty()) dump_trace(run.trace, o.dump_trace);
  std::cout << json{{"path", derain::to_string(run.program.path)},
                    {"category", run.category.index}}.dump() << "\n";
  return 0;
}

int cmd_eval(const Options& o) {
  const auto tools = load_tool_config(o);
  const auto cfg = load_train_config(o);
  echo_config("eval", {{"manifest", o.manifest}, {"scheduler", o.scheduler},
                       {"modulator", o.modulator}, {"seed", o.seed}, {"tool_config", tools}});
  const auto samples = derain::load_samples(derain::read_manifest(o.manifest), false);
  const auto report = derain::evaluate(samples, derain::load_scheduler(o.scheduler),
                                       derain::load_modulator(o.modulator), tools, o.seed, cfg.mu);
  emit(o.out, report.to_json().dump(2) + "\n");
  return 0;
}

int cmd_bench(const Options& o) {
  const auto tools = load_tool_config(o);
  echo_config("bench-strategies", {{"manifest", o.manifest}, {"strategies", o.strategies},
                                   {"seed", o.seed}, {"format", o.format}, {"tool_config", tools},
                                   {"toolbox_size", o.toolbox_size}});
  const auto manifest = derain::read_manifest(o.manifest);
  std::vector<derain::PairedSample> samples;
  for (const auto& r : manifest.records) {
    samples.push_back({r.id, derain::load_image(manifest.resolve(r.degraded)),
                       derain::load_image(manifest.resolve(r.clean))});
  }

  std::optional<derain::SchedulerModel> scheduler;
  std::optional<derain::ModulatorModel> modulator;
  std::vector<derain::Strategy> strategies;
  for (const auto& name : o.strategies) {
    if (name == "agent" || name == "scheduler") {
      if (!scheduler) scheduler = derain::load_scheduler(o.scheduler);
      if (name == "agent" && !modulator) modulator = derain::load_modulator(o.modulator);
      const auto* s = &*scheduler;
      const auto* m = name == "agent" ? &*modulator : nullptr;
      strategies.push_back({name, [s, m, tools](const derain::PairedSample& p, std::size_t) {
                              if (m) return derain::StrategyOutcome{derain::run_agent(*s, *m, p.degraded, tools).output, 1};
                              const auto f = derain::extract_features(p.degraded);
                              const auto cat = derain::schedule(*s, f.pooled).category;
                              return derain::StrategyOutcome{
                                  derain::execute_fixed(p.degraded, derain::category_to_path(cat, s->toolbox_size()), 1.0, tools), 1};
                            }});
    } else {
      strategies.push_back(derain::builtin_strategy(name, tools, o.seed, o.toolbox_size));
    }
  }
  const auto report = derain::benchmark_strategies(samples, strategies);
  emit(o.out, o.format == "table" ? report.to_table() : report.to_json().dump(2) + "\n");
  return 0;
}

int cmd_grad_check(const Options& o) {
  const auto tools = load_tool_config(o);
  const auto cfg = load_train_config(o);
  echo_config("grad-check", {{"manifest", o.manifest}, {"modulator", o.modulator},
                             {"scheduler", o.scheduler}, {"row", o.row}, {"epsilon", o.epsilon},
                             {"threshold", o.threshold}, {"mu", cfg.mu}, {"seed", o.seed}});
  const auto manifest = derain::read_manifest(o.manifest);
  if (o.row < 0 || o.row >= static_cast<int>(manifest.records.size())) {
    throw derain::ManifestError("row index outside the manifest");
  }
  const auto& rec = manifest.records[o.row];
  derain::ModulatorSample sample{derain::load_image(manifest.resolve(rec.degraded)),
                                 derain::load_image(manifest.resolve(rec.clean)), {}};
  sample.features = derain::extract_features(sample.degraded);

  const auto modulator = o.modulator.empty()
                             ? derain::ModulatorModel::initialized(derain::kPixelDim, derain::kEmbeddingDim,
                                                                   o.toolbox_size, 0.7, o.seed)
                             : derain::load_modulator(o.modulator);
  derain::PathCategory category{derain::path_count(modulator.toolbox_size()) - 1};
  if (!o.scheduler.empty()) {
    category = derain::schedule(derain::load_scheduler(o.scheduler), sample.features.pooled).category;
  } else if (rec.gt_category) {
    category = derain::PathCategory{*rec.gt_category};
  }
  const auto report = derain::grad_check(modulator, sample, category, tools, o.epsilon, cfg.mu);
  const bool ok = report.max_relative_error <= o.threshold;
  emit(o.out, json{{"max_relative_error", report.max_relative_error},
                   {"checked", report.checked},
                   {"category", category.index},
                   {"threshold", o.threshold},
                   {"pass", ok}}.dump(2) + "\n");
  return ok ? 0 : kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"derain: plan and execute restoration programs over a frozen toolbox"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Seed for every random draw");
    sub->add_option("--tool-config", o.tool_config, "Tool config JSON (defaults if omitted)");
    sub->add_option("--train-config", o.train_config, "Train config JSON (defaults if omitted)");
    sub->add_option("--toolbox-size", o.toolbox_size, "Number of tools (1-3)")->check(CLI::Range(1, 3));
  };

  auto* synth = app.add_subcommand("synth-clean", "Write procedural clean scenes");
  add_common(synth);
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option("--count", o.count, "Number of scenes");
  synth->add_option("--size", o.size, "Scene side in pixels");

  auto* gen = app.add_subcommand("gen-data", "Generate degraded/clean pairs and a manifest");
  add_common(gen);
  gen->add_option("--clean-dir", o.clean_dir, "Directory of clean PNGs")->required();
  gen->add_option("--out", o.out, "Output directory")->required();
  gen->add_option("--name", o.name, "Manifest / split name");
  gen->add_option("-n,--n", o.n, "Number of rows");
  gen->add_option("--crop", o.crop, "Centre crop side");
  gen->add_option("--ranges", o.ranges, "Degradation ranges JSON (defaults if omitted)");

  auto* oracle = app.add_subcommand("oracle", "Label a manifest with exhaustive-search paths");
  add_common(oracle);
  oracle->add_option("--manifest", o.manifest, "Input manifest")->required();
  oracle->add_option("--out", o.out, "Output manifest (default: in place)");

  auto* ts = app.add_subcommand("train-scheduler", "Stage 1: fit the path scheduler");
  add_common(ts);
  ts->add_option("--manifest", o.manifest, "Labelled training manifest")->required();
  ts->add_option("--out", o.out, "Model file")->required();
  ts->add_option("--loss-curve", o.curve, "Optional JSON loss curve output");

  auto* tm = app.add_subcommand("train-modulator", "Stage 2: fit the strength modulator");
  add_common(tm);
  tm->add_option("--manifest", o.manifest, "Training manifest")->required();
  tm->add_option("--scheduler", o.scheduler, "Frozen scheduler model")->required();
  tm->add_option("--out", o.out, "Model file")->required();
  tm->add_option("--loss-curve", o.curve, "Optional JSON loss curve output");

  auto* run = app.add_subcommand("run", "Plan and execute on an image or a manifest");
  add_common(run);
  run->add_option("--input", o.input, "Input image");
  run->add_option("--output", o.output, "Output image (or directory with --manifest)")->required();
  run->add_option("--manifest", o.manifest, "Run over every degraded image of a manifest");
  run->add_option("--program", o.program, "Execute a saved program instead of planning");
  run->add_option("--scheduler", o.scheduler, "Scheduler model");
  run->add_option("--modulator", o.modulator, "Modulator model");
  run->add_option("--dump-program", o.dump_program, "Write the program JSON (file, or directory with --manifest)");
  run->add_option("--dump-trace", o.dump_trace, "Write every intermediate image into this directory");
  run->add_option("--map-format", o.map_format, "Strength map storage")->check(CLI::IsMember({"png", "f64"}));

  auto* ev = app.add_subcommand("eval", "Evaluate a trained planner on a manifest");
  add_common(ev);
  ev->add_option("--manifest", o.manifest, "Evaluation manifest")->required();
  ev->add_option("--scheduler", o.scheduler, "Scheduler model")->required();
  ev->add_option("--modulator", o.modulator, "Modulator model")->required();
  ev->add_option("--out", o.out, "Write JSON here instead of stdout");

  auto* bench = app.add_subcommand("bench-strategies", "Compare execution strategies");
  add_common(bench);
  bench->add_option("--manifest", o.manifest, "Manifest with paired images")->required();
  bench->add_option("--strategies", o.strategies,
                    "baseline, random, greedy, rollback, exhaustive, scheduler, agent")->delimiter(',');
  bench->add_option("--scheduler", o.scheduler, "Scheduler model (scheduler/agent strategies)");
  bench->add_option("--modulator", o.modulator, "Modulator model (agent strategy)");
  bench->add_option("--format", o.format, "json or table")->check(CLI::IsMember({"json", "table"}));
  bench->add_option("--out", o.out, "Write the report here instead of stdout");

  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of stage-2 gradients");
  add_common(gc);
  gc->add_option("--manifest", o.manifest, "Manifest holding the sample")->required();
  gc->add_option("--row", o.row, "Row index");
  gc->add_option("--modulator", o.modulator, "Modulator model (random init if omitted)");
  gc->add_option("--scheduler", o.scheduler, "Use this scheduler's path instead of the label");
  gc->add_option("--epsilon", o.epsilon, "Central-difference step")->check(CLI::Range(1e-6, 1e-3));
  gc->add_option("--threshold", o.threshold, "Maximum accepted relative error");
  gc->add_option("--out", o.out, "Write JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth_clean(o);
    if (*gen) return cmd_gen_data(o);
    if (*oracle) return cmd_oracle(o);
    if (*ts) return cmd_train_scheduler(o);
    if (*tm) return cmd_train_modulator(o);
    if (*run) {
      if (o.program.empty() && (o.scheduler.empty() || o.modulator.empty())) {
        std::cerr << "run: need --program, or both --scheduler and --modulator\n";
        return kExitUsage;
      }
      if (o.manifest.empty() && o.input.empty()) {
        std::cerr << "run: need --input or --manifest\n";
        return kExitUsage;
      }
      return cmd_run(o);
    }
    if (*ev) return cmd_eval(o);
    if (*bench) return cmd_bench(o);
    if (*gc) return cmd_grad_check(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
