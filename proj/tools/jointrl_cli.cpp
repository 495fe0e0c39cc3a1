// Command-line runner: config-driven training with seed fan-out, evolutionary
// search, representation probes, and report generation.

#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "jointrl/config.hpp"
#include "jointrl/report.hpp"

namespace fs = std::filesystem;
using namespace jointrl;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::string output_root(const std::string& flag_value, const std::string& cfg_value) {
  if (!flag_value.empty()) return flag_value;
  if (!cfg_value.empty()) return cfg_value;
  if (const char* env_root = std::getenv("JOINTRL_OUT")) return env_root;
  return ".";
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path seed_csv_path(const fs::path& dir, const cli::ExperimentConfig& cfg, uint64_t seed) {
  return dir / (cfg.name + "_seed" + std::to_string(seed) + ".csv");
}

void run_seed_to_files(const cli::ExperimentConfig& cfg, uint64_t seed, const fs::path& dir) {
  train::TrainConfig tc = cfg.train;
  tc.seed = seed;
  tc.agent_name = cfg.name;
  std::unique_ptr<train::JointTrainer> trainer =
      tc.regime == train::Regime::pretrain_then_rl ? train::make_pretrained_trainer(tc)
                                                   : std::make_unique<train::JointTrainer>(tc);
  train::RunResult result = trainer->run();
  std::string csv = train::results_csv_header();
  train::append_results_csv(csv, tc, result);
  write_file(seed_csv_path(dir, cfg, seed), csv);
  trainer->save_checkpoint(
      (dir / (cfg.name + "_seed" + std::to_string(seed) + ".ckpt")).string());
  if (result.failed)
    std::cerr << "seed " << seed << " failed: " << result.fail_reason << "\n";
}

int cmd_train(const std::string& config_path, const std::string& out_flag,
              const std::string& seeds_flag, int parallel) {
  cli::ExperimentConfig cfg = cli::load_experiment_config(config_path);
  if (!seeds_flag.empty()) {
    cfg.seeds.clear();
    std::istringstream is(seeds_flag);
    std::string tok;
    while (std::getline(is, tok, ',')) cfg.seeds.push_back(std::stoull(tok));
    cfg.validate();
  }
  const fs::path dir = output_root(out_flag, cfg.output_dir);
  fs::create_directories(dir);

  if (parallel > 1) {
    // fan seeds out to isolated worker processes; results merge via files
    std::vector<pid_t> children;
    size_t next = 0;
    int failures = 0;
    while (next < cfg.seeds.size() || !children.empty()) {
      while (static_cast<int>(children.size()) < parallel && next < cfg.seeds.size()) {
        const uint64_t seed = cfg.seeds[next++];
        const pid_t pid = fork();
        if (pid < 0) throw std::runtime_error("fork failed");
        if (pid == 0) {
          try {
            run_seed_to_files(cfg, seed, dir);
            _exit(0);
          } catch (const std::exception& e) {
            std::cerr << "seed " << seed << ": " << e.what() << "\n";
            _exit(1);
          }
        }
        children.push_back(pid);
      }
      int status = 0;
      const pid_t done = waitpid(-1, &status, 0);
      if (done > 0) {
        children.erase(std::remove(children.begin(), children.end(), done), children.end());
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) ++failures;
      }
    }
    if (failures > 0) return kExitRuntime;
  } else {
    for (uint64_t seed : cfg.seeds) run_seed_to_files(cfg, seed, dir);
  }

  // merge per-seed shards in seed order
  std::string merged = train::results_csv_header();
  for (uint64_t seed : cfg.seeds) {
    const std::string shard = read_file(seed_csv_path(dir, cfg, seed));
    const size_t nl = shard.find('\n');
    merged += shard.substr(nl + 1);
  }
  write_file(dir / (cfg.name + "_results.csv"), merged);

  auto rows = cli::parse_results_csv(merged);
  write_file(dir / (cfg.name + "_summary.csv"), cli::summary_csv(cli::final_score_table(rows)));
  std::cout << "wrote " << (dir / (cfg.name + "_results.csv")).string() << "\n";
  return 0;
}

int cmd_evolve(const std::string& config_path, const std::string& out_flag) {
  cli::SearchExperimentConfig cfg = cli::load_search_config(config_path);
  const fs::path dir = output_root(out_flag, cfg.output_dir);
  fs::create_directories(dir);

  // particle evaluation: one full training run per (combo, seed, env)
  evolve::RunFn run_fn = [&cfg](const ssl::LossCombo& combo, uint64_t seed,
                                const std::string& env_name) {
    train::TrainConfig tc = cfg.base;
    tc.env.name = env_name;
    tc.losses = ssl::LossCombo{};
    for (const auto& [name, w] : combo.weights) tc.losses.set(name, w);
    tc.aug_online.m = combo.m1;
    tc.aug_target.m = combo.m2;
    tc.seed = seed;
    train::RunResult result = train::train_run(tc);
    return evolve::RunOutcome{result.final_score, result.failed};
  };
  // failed runs score as the env's minimum return
  for (const auto& env_name : cfg.search.objective.envs) {
    env::EnvSpec spec = cfg.base.env;
    spec.name = env_name;
    cfg.search.objective.min_scores[env_name] = env::make_env(spec)->min_return();
  }

  const fs::path log_path = dir / (cfg.name + "_search.jsonl");
  evolve::SearchResult result = evolve::run_search(cfg.search, run_fn, log_path.string());

  cli::ExperimentConfig best;
  best.name = cfg.name + "_best";
  best.train = cfg.base;
  best.seeds = {1, 2, 3, 4, 5};
  best = cli::apply_combo(best, result.best_combo);
  write_file(dir / (cfg.name + "_best.cfg"), cli::experiment_config_text(best));
  std::cout << "search objective " << result.best_objective << ", exported "
            << (dir / (cfg.name + "_best.cfg")).string() << "\n";
  return 0;
}

int cmd_probe(const std::string& config_path, const std::vector<std::string>& checkpoints,
              const std::string& dataset, const std::string& out_path) {
  train::TrainConfig tc;
  if (!config_path.empty()) tc = cli::load_experiment_config(config_path).train;
  const std::string csv = cli::probe_checkpoints(tc, checkpoints, dataset);
  if (out_path.empty())
    std::cout << csv;
  else
    write_file(out_path, csv);
  return 0;
}

int cmd_report(const std::string& results_dir, const std::string& out_flag) {
  std::vector<fs::path> csvs;
  std::vector<std::pair<std::string, std::string>> repr_csvs;
  if (!fs::is_directory(results_dir))
    throw std::runtime_error("report: '" + results_dir + "' is not a directory");
  for (const auto& entry : fs::directory_iterator(results_dir))
    if (entry.path().extension() == ".csv") csvs.push_back(entry.path());
  std::sort(csvs.begin(), csvs.end());

  std::vector<cli::ResultRow> rows;
  for (const auto& path : csvs) {
    const std::string name = path.filename().string();
    const std::string text = read_file(path);
    if (text.rfind("update_step", 0) == 0) {
      repr_csvs.emplace_back(path.stem().string(), text);
    } else if (text.rfind("agent_name,env,seed", 0) == 0) {
      auto parsed = cli::parse_results_csv(text);
      rows.insert(rows.end(), parsed.begin(), parsed.end());
    }
  }
  if (rows.empty()) throw std::runtime_error("report: no results CSVs in '" + results_dir + "'");

  const fs::path dir = output_root(out_flag, results_dir);
  cli::ReportFiles files = cli::build_report(rows, repr_csvs);
  for (const auto& [name, content] : files.files) write_file(dir / name, content);
  std::cout << "wrote " << files.files.size() << " report files to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pixel RL with pluggable self-supervised losses"};
  app.require_subcommand(1);

  std::string config_path, out_dir, seeds_flag, dataset, probe_out, results_dir;
  std::vector<std::string> checkpoints;
  int parallel = 1;

  auto* train_cmd = app.add_subcommand("train", "train one agent config across seeds");
  train_cmd->add_option("--config", config_path, "experiment config file")->required();
  train_cmd->add_option("--out", out_dir, "output directory");
  train_cmd->add_option("--seeds", seeds_flag, "comma-separated seed list override");
  train_cmd->add_option("--parallel", parallel, "worker processes for seed fan-out");

  auto* evolve_cmd = app.add_subcommand("evolve", "evolutionary search over loss combos");
  evolve_cmd->add_option("--config", config_path, "search config file")->required();
  evolve_cmd->add_option("--out", out_dir, "output directory");

  auto* probe_cmd = app.add_subcommand("probe", "representation metrics for checkpoints");
  probe_cmd->add_option("--config", config_path, "experiment config file");
  probe_cmd->add_option("--checkpoint", checkpoints, "checkpoint file(s)")->required();
  probe_cmd->add_option("--dataset", dataset, "replay-buffer snapshot")->required();
  probe_cmd->add_option("--out", probe_out, "output CSV path");

  auto* report_cmd = app.add_subcommand("report", "tables and plots from results CSVs");
  report_cmd->add_option("--results", results_dir, "directory of results CSVs")->required();
  report_cmd->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(config_path, out_dir, seeds_flag, parallel);
    if (evolve_cmd->parsed()) return cmd_evolve(config_path, out_dir);
    if (probe_cmd->parsed()) return cmd_probe(config_path, checkpoints, dataset, probe_out);
    if (report_cmd->parsed()) return cmd_report(results_dir, out_dir);
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
