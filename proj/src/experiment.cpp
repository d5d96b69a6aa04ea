#include "bacr/experiment.hpp"

#include "bacr/checkpoint.hpp"
#include "bacr/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace bacr {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

ExperimentPreset resolve_preset(const std::string& name) {
  ExperimentPreset p;
  p.name = name;
  if (name == "bacr") {
    p.flags = {true, true, true, true};
  } else if (name == "grpo") {
    p.flags = {false, false, false, false};
    p.fixed_budget = true;
  } else if (name == "brpo") {
    p.flags = {false, false, false, false};
  } else if (name.rfind("ablation:", 0) == 0) {
    p.flags = {false, false, false, false};
    const std::string spec = name.substr(9);
    if (spec.empty()) throw std::invalid_argument("preset '" + name + "': empty flag list (use ablation:none)");
    if (upper(spec) != "NONE") {
      std::istringstream in(spec);
      std::string tok;
      while (std::getline(in, tok, '+')) {
        const std::string t = upper(tok);
        if (t == "BUP") p.flags.bup = true;
        else if (t == "CAS") p.flags.cas = true;
        else if (t == "TDR") p.flags.tdr = true;
        else if (t == "BCAE") p.flags.bcae = true;
        else throw std::invalid_argument("preset '" + name + "': unknown flag '" + tok + "' (BUP, CAS, TDR, BCAE)");
      }
    }
  } else {
    throw std::invalid_argument("unknown preset '" + name + "' (bacr, grpo, brpo, ablation:<flags>)");
  }
  return p;
}

TrainConfig apply_preset(TrainConfig cfg, const ExperimentPreset& preset) {
  cfg.flags = preset.flags;
  cfg.fixed_budget = preset.fixed_budget;
  return cfg;
}

std::vector<ModeFlags> ablation_rows() {
  return {{false, false, false, false}, {true, false, false, false}, {true, true, false, false},
          {true, false, true, false},   {true, false, false, true},  {true, true, true, false},
          {true, true, false, true},    {true, true, true, true}};
}

std::string ablation_label(const ModeFlags& f) {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += '+';
    s += name;
  };
  add(f.bup, "BUP");
  add(f.cas, "CAS");
  add(f.tdr, "TDR");
  add(f.bcae, "BCAE");
  return s.empty() ? "none" : s;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_metrics_csv(std::ostream& out, const std::vector<IterationMetrics>& rows) {
  out << "epoch,iteration,mean_reward,mean_outcome,policy_loss,value_loss,entropy,total_loss,adv_mean,adv_var,"
         "max_group_adv_mean,progress_contrib,mean_budget,tokens_used,grad_norm,clip_fraction,skipped\n";
  for (const auto& m : rows) {
    out << m.epoch << ',' << m.iteration;
    for (double v : {m.mean_reward, m.mean_outcome, m.policy_loss, m.value_loss, m.entropy, m.total_loss, m.adv_mean,
                     m.adv_var, m.max_group_adv_mean, m.progress_contrib, m.mean_budget, m.tokens_used, m.grad_norm,
                     m.clip_fraction})
      out << ',' << format_double(v);
    out << ',' << m.skipped << '\n';
  }
}

void write_curriculum_csv(std::ostream& out, const std::vector<CurriculumSnapshot>& snaps) {
  out << "epoch,k,rho,mu,w\n";
  for (const auto& s : snaps)
    for (int k = 0; k < s.state.groups(); ++k)
      out << s.epoch << ',' << k + 1 << ',' << format_double(s.state.pass_rates[k]) << ','
          << format_double(s.state.mu[k]) << ',' << format_double(s.state.weights[k]) << '\n';
}

void write_rewards_csv(std::ostream& out, const std::vector<RewardRow>& rows) {
  out << "iteration,trace_id,task_id,budget,j,b_j,r_j,progress_j,dense_j\n";
  for (const auto& r : rows)
    out << r.iteration << ',' << r.trace_id << ',' << r.task_id << ',' << r.budget << ',' << r.j << ',' << r.point
        << ',' << r.outcome << ',' << format_double(r.progress) << ',' << format_double(r.dense) << '\n';
}

void write_eval_csv(std::ostream& out, const std::vector<EvalSnapshot>& evals) {
  out << "epoch,budget,accuracy,mean_tokens\n";
  for (const auto& e : evals)
    for (const auto& r : e.rows)
      out << e.epoch << ',' << r.budget << ',' << format_double(r.accuracy) << ',' << format_double(r.mean_tokens)
          << '\n';
}

double final_mean_accuracy(const TrainResult& r) {
  if (r.evals.empty() || r.evals.back().rows.empty()) throw std::logic_error("final_mean_accuracy: no evaluation");
  const auto& rows = r.evals.back().rows;
  double s = 0;
  for (const auto& row : rows) s += row.accuracy;
  return s / static_cast<double>(rows.size());
}

double tight_budget_accuracy(const TrainResult& r) {
  if (r.evals.empty()) throw std::logic_error("tight_budget_accuracy: no evaluation");
  const EvalRow* best = nullptr;
  for (const auto& row : r.evals.back().rows)
    if (row.budget > 0 && (!best || row.budget < best->budget)) best = &row;
  if (!best) throw std::logic_error("tight_budget_accuracy: grid has no positive budget");
  return best->accuracy;
}

nlohmann::json run_summary(const TrainConfig& cfg, const std::string& preset, const TrainResult& r) {
  nlohmann::json j;
  j["preset"] = preset;
  j["seed"] = cfg.seed;
  j["config"] = config_to_json(cfg);
  j["iterations"] = r.history.size();
  j["diverged"] = r.diverged;
  if (r.diverged) j["diagnostic"] = r.diagnostic;
  nlohmann::json acc = nlohmann::json::array();
  if (!r.evals.empty()) {
    for (const auto& row : r.evals.back().rows)
      acc.push_back({{"budget", row.budget}, {"accuracy", row.accuracy}, {"mean_tokens", row.mean_tokens}});
    j["final_mean_accuracy"] = final_mean_accuracy(r);
    j["tight_budget_accuracy"] = tight_budget_accuracy(r);
  }
  j["final_accuracy"] = acc;
  nlohmann::json cur = nlohmann::json::array();
  for (const auto& s : r.curriculum)
    cur.push_back({{"epoch", s.epoch}, {"rho", s.state.pass_rates}, {"mu", s.state.mu}, {"w", s.state.weights}});
  j["curriculum"] = cur;
  if (!r.history.empty()) {
    const auto& last = r.history.back();
    j["final_mean_reward"] = last.mean_reward;
  }
  return j;
}

RunOutcome run_experiment(const TrainConfig& cfg, const std::string& preset, const fs::path& dir, std::ostream* log) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "config.txt");
    out << "# preset=" << preset << '\n' << config_to_text(cfg);
  }
  const TaskSet tasks = make_taskset(cfg.taskset);
  save_taskset(tasks, (dir / "taskset.json").string());

  RunOutcome outcome;
  outcome.dir = dir;
  outcome.result = train(cfg, tasks);
  const TrainResult& r = outcome.result;

  {
    auto out = open_out(dir / "metrics.csv");
    write_metrics_csv(out, r.history);
  }
  {
    auto out = open_out(dir / "curriculum.csv");
    write_curriculum_csv(out, r.curriculum);
  }
  {
    auto out = open_out(dir / "rewards.csv");
    write_rewards_csv(out, r.rewards);
  }
  {
    auto out = open_out(dir / "eval.csv");
    write_eval_csv(out, r.evals);
  }
  save_checkpoint(make_checkpoint(r.policy, r.value, static_cast<int>(r.history.size())), (dir / "checkpoint.json").string());
  {
    auto out = open_out(dir / "summary.json");
    out << run_summary(cfg, preset, r).dump(2) << '\n';
  }

  if (r.diverged) {
    nlohmann::json d = {{"diagnostic", r.diagnostic},
                        {"iterations_completed", r.history.size()},
                        {"checkpoint", (dir / "checkpoint.json").string()}};
    auto out = open_out(dir / "diagnostic.json");
    out << d.dump(2) << '\n';
    outcome.exit_code = kExitDiverged;
    if (log) *log << "diverged: " << r.diagnostic << "\nsnapshot: " << (dir / "diagnostic.json").string() << '\n';
    return outcome;
  }

  if (log && !r.evals.empty()) {
    *log << "preset " << preset << ", seed " << cfg.seed << ", " << r.history.size() << " iterations\n";
    *log << std::setw(8) << "budget" << std::setw(12) << "accuracy" << std::setw(14) << "mean_tokens" << '\n';
    for (const auto& row : r.evals.back().rows)
      *log << std::setw(8) << row.budget << std::setw(12) << std::fixed << std::setprecision(4) << row.accuracy
           << std::setw(14) << std::setprecision(2) << row.mean_tokens << '\n';
    *log << std::defaultfloat;
  }
  return outcome;
}

AblationReport run_ablation_grid(const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                                 const fs::path& dir, std::ostream* log) {
  AblationReport report;
  for (const ModeFlags& flags : ablation_rows()) {
    AblationRow row;
    row.flags = flags;
    row.label = ablation_label(flags);
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.flags = flags;
      cfg.fixed_budget = false;
      cfg.seed = seed;
      const fs::path cell = dir / row.label / ("seed-" + std::to_string(seed));
      try {
        const RunOutcome o = run_experiment(cfg, "ablation:" + row.label, cell);
        if (o.exit_code != kExitOk) throw std::runtime_error(o.result.diagnostic);
        row.seeds.push_back(seed);
        row.accuracy.push_back(final_mean_accuracy(o.result));
        if (log) *log << row.label << " seed " << seed << ": " << format_double(row.accuracy.back()) << '\n';
      } catch (const std::exception& e) {
        ++row.failed;
        report.complete = false;
        if (log) *log << row.label << " seed " << seed << ": FAILED (" << e.what() << ")\n";
      }
    }
    if (!row.accuracy.empty()) {
      const double n = static_cast<double>(row.accuracy.size());
      row.mean = std::accumulate(row.accuracy.begin(), row.accuracy.end(), 0.0) / n;
      for (double a : row.accuracy) row.stddev += (a - row.mean) * (a - row.mean);
      row.stddev = std::sqrt(row.stddev / n);
    }
    report.rows.push_back(row);
  }
  const double ref = report.rows.front().mean;
  for (auto& row : report.rows) row.delta = row.mean - ref;
  return report;
}

void write_ablation_csv(std::ostream& out, const AblationReport& report) {
  out << "BUP,CAS,TDR,BCAE,label,completed,failed,mean_accuracy,std_accuracy,delta\n";
  for (const auto& r : report.rows)
    out << r.flags.bup << ',' << r.flags.cas << ',' << r.flags.tdr << ',' << r.flags.bcae << ',' << r.label << ','
        << r.accuracy.size() << ',' << r.failed << ',' << format_double(r.mean) << ',' << format_double(r.stddev)
        << ',' << format_double(r.delta) << '\n';
}

}  // namespace bacr
