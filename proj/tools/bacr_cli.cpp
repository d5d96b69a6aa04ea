// Command-line entry point: run, ablate, eval, variance, check.

#include "bacr/checkpoint.hpp"
#include "bacr/config.hpp"
#include "bacr/experiment.hpp"
#include "bacr/random.hpp"
#include "bacr/selfcheck.hpp"
#include "bacr/variance.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using namespace bacr;

namespace {

struct Common {
  std::string config;
  std::string preset;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  int iters = 0;
  int workers = 0;
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, Common& c, bool with_preset = true) {
  app->add_option("--config", c.config, "key=value or JSON config file")->check(CLI::ExistingFile);
  if (with_preset) app->add_option("--preset", c.preset, "bacr | grpo | brpo | ablation:<flags>");
  app->add_option("--seed", c.seed, "root seed")->each([&c](const std::string&) { c.seed_set = true; });
  app->add_option("--out", c.out, "output directory");
  app->add_option("--iters", c.iters, "training iterations (rounded up to whole epochs)")->check(CLI::PositiveNumber);
  app->add_option("--workers", c.workers, "rollout worker threads")->check(CLI::PositiveNumber);
  app->add_option("--set", c.sets, "config override key=value (repeatable)");
}

/// Defaults, then config file, then preset flags, then --set, then direct flags.
TrainConfig resolve_config(const Common& c, const std::string& default_preset, std::string& preset_name) {
  TrainConfig cfg = c.config.empty() ? TrainConfig{} : parse_config(c.config);
  preset_name = c.preset.empty() ? default_preset : c.preset;
  if (!preset_name.empty()) {
    try {
      cfg = apply_preset(cfg, resolve_preset(preset_name));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("preset: ") + e.what());
    }
  } else {
    preset_name = "config";
  }
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set: expected key=value, got '" + s + "'");
    set_config_text(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (c.seed_set) cfg.seed = c.seed;
  if (c.workers > 0) cfg.workers = c.workers;
  if (c.iters > 0) {
    if (c.iters < cfg.iters_per_epoch) cfg.iters_per_epoch = c.iters;
    cfg.epochs = (c.iters + cfg.iters_per_epoch - 1) / cfg.iters_per_epoch;
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

fs::path output_dir(const Common& c, const std::string& leaf) {
  if (!c.out.empty()) return c.out;
  const char* root = std::getenv("BACR_OUT_ROOT");
  return fs::path(root && *root ? root : "runs") / leaf;
}

std::string sanitize(std::string s) {
  for (char& ch : s)
    if (ch == ':' || ch == '+') ch = '_';
  return s;
}

void print_eval(const std::vector<EvalRow>& rows) {
  std::cout << std::setw(8) << "budget" << std::setw(12) << "accuracy" << std::setw(14) << "mean_tokens" << '\n';
  for (const auto& r : rows)
    std::cout << std::setw(8) << r.budget << std::setw(12) << std::fixed << std::setprecision(4) << r.accuracy
              << std::setw(14) << std::setprecision(2) << r.mean_tokens << '\n';
  std::cout << std::defaultfloat;
}

int cmd_run(const Common& c) {
  std::string preset;
  const TrainConfig cfg = resolve_config(c, "bacr", preset);
  const fs::path dir = output_dir(c, sanitize(preset) + "-seed" + std::to_string(cfg.seed));
  const RunOutcome o = run_experiment(cfg, preset, dir, &std::cout);
  std::cout << "outputs: " << dir.string() << '\n';
  return o.exit_code;
}

int cmd_ablate(const Common& c, const std::vector<std::uint64_t>& seeds) {
  std::string preset;
  const TrainConfig cfg = resolve_config(c, "", preset);
  const fs::path dir = output_dir(c, "ablation");
  const AblationReport rep = run_ablation_grid(cfg, seeds, dir, &std::cout);
  fs::create_directories(dir);
  std::ofstream csv(dir / "ablation.csv");
  write_ablation_csv(csv, rep);
  std::cout << '\n'
            << std::left << std::setw(16) << "components" << std::right << std::setw(10) << "accuracy" << std::setw(10)
            << "std" << std::setw(10) << "delta" << std::setw(8) << "failed" << '\n';
  for (const auto& r : rep.rows)
    std::cout << std::left << std::setw(16) << r.label << std::right << std::fixed << std::setprecision(4)
              << std::setw(10) << r.mean << std::setw(10) << r.stddev << std::showpos << std::setw(10) << r.delta
              << std::noshowpos << std::setw(8) << r.failed << '\n';
  std::cout << std::defaultfloat << "outputs: " << dir.string() << '\n';
  return rep.complete ? kExitOk : kExitPartial;
}

int cmd_eval(const Common& c, const std::string& checkpoint, bool greedy, int samples) {
  std::string preset;
  TrainConfig cfg = resolve_config(c, "", preset);
  const Checkpoint ck = load_checkpoint(checkpoint);
  const TaskSet tasks = make_taskset(cfg.taskset);
  EvalOptions opts;
  opts.greedy = greedy;
  opts.samples = samples > 0 ? samples : cfg.eval_samples;
  opts.seed = derive_seed(cfg.seed, {0, 31});
  opts.workers = cfg.workers;
  const auto rows = evaluate_anytime(ck.policy, tasks, cfg.eval_grid, opts);
  print_eval(rows);
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    std::ofstream out(fs::path(c.out) / "eval.csv");
    write_eval_csv(out, {EvalSnapshot{0, rows}});
  }
  return kExitOk;
}

int cmd_variance(const Common& c, const std::string& checkpoint, int reps, bool skip_fit, ValueFitOptions fo) {
  std::string preset;
  const TrainConfig cfg = resolve_config(c, checkpoint.empty() ? "bacr" : "", preset);
  const TaskSet tasks = make_taskset(cfg.taskset);
  const fs::path dir = output_dir(c, "variance-seed" + std::to_string(cfg.seed));
  fs::create_directories(dir);

  PolicyParams<double> policy;
  ValueNetParams<double> value;
  int iteration = 0;
  if (checkpoint.empty()) {
    TrainOptions topts;
    topts.record_rewards = false;
    topts.evaluate = false;
    const TrainResult r = train(cfg, tasks, topts);
    if (r.diverged) {
      std::cerr << "diverged: " << r.diagnostic << '\n';
      return kExitDiverged;
    }
    policy = r.policy;
    value = r.value;
    iteration = static_cast<int>(r.history.size());
  } else {
    const Checkpoint ck = load_checkpoint(checkpoint);
    policy = ck.policy;
    value = ck.value;
    iteration = ck.iteration;
  }
  if (!skip_fit) {
    fo.seed = derive_seed(cfg.seed, {41});
    fo.workers = cfg.workers;
    const ValueFitReport fr = fit_value_on_policy(policy, value, tasks, cfg, fo);
    std::cout << "value fit: " << fr.steps << " steps, loss " << fr.initial_loss << " -> " << fr.final_loss << " (held out "
              << fr.holdout_loss << ")\n";
  }
  VarianceOptions vo;
  vo.group_size = cfg.group_size;
  vo.repetitions = reps;
  vo.levels = cfg.budget_levels;
  vo.seed = derive_seed(cfg.seed, {42});
  vo.workers = cfg.workers;
  vo.iteration = iteration;
  const auto rows = measure_variance(policy, value, tasks, cfg, vo);
  std::ofstream csv(dir / "variance.csv");
  write_variance_csv(csv, rows);
  write_variance_csv(std::cout, rows);
  std::cout << "outputs: " << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budget-adaptive curriculum reasoning on a synthetic verifiable task set"};
  app.require_subcommand(1);

  Common run_c, abl_c, eval_c, var_c;
  auto* run = app.add_subcommand("run", "train one preset and write run artifacts");
  add_common(run, run_c);

  auto* abl = app.add_subcommand("ablate", "run the 8-row component ablation grid over seeds");
  add_common(abl, abl_c, false);
  std::vector<std::uint64_t> seeds{1, 2, 3};
  abl->add_option("--seeds", seeds, "seeds per grid row")->delimiter(',');

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint across the budget grid");
  add_common(ev, eval_c, false);
  std::string eval_ckpt;
  bool eval_greedy = false;
  int eval_samples = 0;
  ev->add_option("--checkpoint", eval_ckpt, "checkpoint.json from a run")->required()->check(CLI::ExistingFile);
  ev->add_flag("--greedy", eval_greedy, "greedy decoding instead of sampled expectation");
  ev->add_option("--samples", eval_samples, "sampled traces per task");

  auto* var = app.add_subcommand("variance", "measure BRPO vs BCAE advantage and gradient variance");
  add_common(var, var_c);
  std::string var_ckpt;
  int reps = 20;
  bool skip_fit = false;
  ValueFitOptions fit;
  var->add_option("--checkpoint", var_ckpt, "frozen policy and value head (default: train first)")
      ->check(CLI::ExistingFile);
  var->add_option("--reps", reps, "resampling repetitions")->check(CLI::Range(2, 100000));
  var->add_flag("--no-fit", skip_fit, "use the value head as stored instead of refitting it");
  var->add_option("--fit-steps", fit.max_steps, "maximum value-fit gradient steps")->check(CLI::PositiveNumber);
  var->add_option("--fit-lr", fit.learning_rate, "value-fit step size")->check(CLI::PositiveNumber);
  var->add_option("--fit-samples", fit.samples_per_task, "value-fit traces per task")->check(CLI::PositiveNumber);

  auto* chk = app.add_subcommand("check", "gradient and invariant self-checks");
  std::uint64_t chk_seed = 7;
  chk->add_option("--seed", chk_seed, "seed for random instances");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_c);
    if (*abl) return cmd_ablate(abl_c, seeds);
    if (*ev) return cmd_eval(eval_c, eval_ckpt, eval_greedy, eval_samples);
    if (*var) return cmd_variance(var_c, var_ckpt, reps, skip_fit, fit);
    if (*chk) return run_self_checks(std::cout, chk_seed) ? kExitOk : 4;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return kExitOk;
}
