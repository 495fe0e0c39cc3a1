#pragma once

#include "jointrl/repr_metrics.hpp"
#include "jointrl/sac.hpp"
#include "jointrl/stats.hpp"
#include "jointrl/trainer.hpp"

namespace jointrl::cli {

struct ResultRow {
  std::string agent, env;
  uint64_t seed = 0;
  long env_step = 0;
  double eval_return = 0.0;
  bool failed = false;  // nan sentinel rows
};

std::vector<ResultRow> parse_results_csv(const std::string& text);

// Final score per (agent, env, seed): the eval return at the largest step.
evalkit::ScoreTable final_score_table(const std::vector<ResultRow>& rows);

struct ReportFiles {
  std::map<std::string, std::string> files;  // relative path -> content
};

// Tables + SVG curves, regenerable byte-identically from the same rows.
ReportFiles build_report(const std::vector<ResultRow>& rows,
                         const std::vector<std::pair<std::string, std::string>>& repr_csvs = {});

// One summary line per (agent, env) in the "IQM ± std" style.
std::string summary_csv(const evalkit::ScoreTable& table);

// Encodes every transition of the dataset with the agent's online encoder and
// assembles the representation-metrics dataset (values are Q(phi, pi(phi))).
evalkit::ReprDataset build_repr_dataset(agent::SacAgent& agent, const train::ReplayBuffer& buffer,
                                        long max_rows = 2048);

// The probe command body: metrics for each checkpoint against a donor buffer.
std::string probe_checkpoints(const train::TrainConfig& cfg,
                              const std::vector<std::string>& checkpoint_paths,
                              const std::string& dataset_path);

}  // namespace jointrl::cli
