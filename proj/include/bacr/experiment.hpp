#ifndef BACR_EXPERIMENT_HPP
#define BACR_EXPERIMENT_HPP

#include "bacr/trainer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace bacr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitDiverged = 2;
inline constexpr int kExitPartial = 3;

struct ExperimentPreset {
  std::string name;
  ModeFlags flags;
  bool fixed_budget = false;
};

/// bacr, grpo, brpo, or ablation:<flags> with flags joined by '+' (e.g.
/// ablation:BUP+CAS) or ablation:none. Throws std::invalid_argument otherwise.
ExperimentPreset resolve_preset(const std::string& name);
TrainConfig apply_preset(TrainConfig cfg, const ExperimentPreset& preset);

/// The eight component combinations of the ablation table, all-off first.
std::vector<ModeFlags> ablation_rows();
std::string ablation_label(const ModeFlags& flags);  // "none", "BUP", "BUP+CAS", ...

std::string format_double(double x);  // %.17g

void write_metrics_csv(std::ostream& out, const std::vector<IterationMetrics>& rows);
void write_curriculum_csv(std::ostream& out, const std::vector<CurriculumSnapshot>& snaps);
void write_rewards_csv(std::ostream& out, const std::vector<RewardRow>& rows);
void write_eval_csv(std::ostream& out, const std::vector<EvalSnapshot>& evals);

/// Mean accuracy over the grid at the last evaluation.
double final_mean_accuracy(const TrainResult& r);
/// Last-evaluation accuracy at the smallest positive grid budget.
double tight_budget_accuracy(const TrainResult& r);

nlohmann::json run_summary(const TrainConfig& cfg, const std::string& preset, const TrainResult& r);

struct RunOutcome {
  int exit_code = kExitOk;
  std::filesystem::path dir;
  TrainResult result;
};

/// Trains `cfg` and writes config.txt, taskset.json, metrics.csv,
/// curriculum.csv, rewards.csv, eval.csv, summary.json and checkpoint.json
/// into `dir`. A diverged run also writes diagnostic.json and exits with
/// kExitDiverged. Progress and the accuracy table go to `log` when set.
RunOutcome run_experiment(const TrainConfig& cfg, const std::string& preset, const std::filesystem::path& dir,
                          std::ostream* log = nullptr);

struct AblationRow {
  ModeFlags flags;
  std::string label;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracy;  // per completed seed
  int failed = 0;
  double mean = 0;
  double stddev = 0;  // population std over completed seeds
  double delta = 0;   // mean minus the all-off mean
};

struct AblationReport {
  std::vector<AblationRow> rows;
  bool complete = true;
};

/// Runs every ablation row for every seed under dir/<label>/seed-<s>. Failed
/// cells are recorded and the grid continues.
AblationReport run_ablation_grid(const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                                 const std::filesystem::path& dir, std::ostream* log = nullptr);

void write_ablation_csv(std::ostream& out, const AblationReport& report);

}  // namespace bacr

#endif  // BACR_EXPERIMENT_HPP
