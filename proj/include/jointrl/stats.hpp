#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace jointrl::evalkit {

// Interquartile mean: 25% symmetric trimmed mean with fractional endpoint
// weighting when n/4 is not an integer.
double iqm(std::span<const double> scores);

double mean(std::span<const double> xs);
double sample_std(std::span<const double> xs);

// Per-seed scores keyed by (agent, env). Relative Score needs every agent to
// cover every env and at least two agents per env.
class ScoreTable {
 public:
  void add(const std::string& agent, const std::string& env, double score);
  void set_scores(const std::string& agent, const std::string& env, std::vector<double> scores);
  const std::vector<double>& scores(const std::string& agent, const std::string& env) const;
  std::vector<std::string> agents() const;
  std::vector<std::string> envs() const;
  bool complete() const;  // every agent covers every env

 private:
  std::vector<std::string> agent_order_, env_order_;
  std::map<std::pair<std::string, std::string>, std::vector<double>> cells_;
};

// S_A = sum over envs of (IQM^{A,e} - mean_e) / std_e, with mean/std taken
// over the agents' IQMs in env e (std uses the n-1 form, which is what
// reproduces the published tables).
std::map<std::string, double> relative_score(const ScoreTable& table);

double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace jointrl::evalkit
