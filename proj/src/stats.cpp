#include "jointrl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jointrl::evalkit {

double iqm(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("iqm: empty score list");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  const double trim = n / 4.0;
  double total = 0.0, weight_sum = 0.0;
  for (size_t i = 0; i < sorted.size(); ++i) {
    // overlap of the observation interval [i, i+1) with the kept band
    const double lo = std::max(static_cast<double>(i), trim);
    const double hi = std::min(static_cast<double>(i) + 1.0, n - trim);
    const double w = std::max(0.0, hi - lo);
    total += w * sorted[i];
    weight_sum += w;
  }
  return total / weight_sum;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty list");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("sample_std: need at least two values");
  const double mu = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

void ScoreTable::add(const std::string& agent, const std::string& env, double score) {
  auto key = std::make_pair(agent, env);
  auto it = cells_.find(key);
  if (it == cells_.end()) {
    if (std::find(agent_order_.begin(), agent_order_.end(), agent) == agent_order_.end())
      agent_order_.push_back(agent);
    if (std::find(env_order_.begin(), env_order_.end(), env) == env_order_.end())
      env_order_.push_back(env);
    cells_[key] = {score};
  } else {
    it->second.push_back(score);
  }
}

void ScoreTable::set_scores(const std::string& agent, const std::string& env,
                            std::vector<double> scores) {
  if (std::find(agent_order_.begin(), agent_order_.end(), agent) == agent_order_.end())
    agent_order_.push_back(agent);
  if (std::find(env_order_.begin(), env_order_.end(), env) == env_order_.end())
    env_order_.push_back(env);
  cells_[std::make_pair(agent, env)] = std::move(scores);
}

const std::vector<double>& ScoreTable::scores(const std::string& agent,
                                              const std::string& env) const {
  auto it = cells_.find(std::make_pair(agent, env));
  if (it == cells_.end())
    throw std::out_of_range("score table: no scores for (" + agent + ", " + env + ")");
  return it->second;
}

std::vector<std::string> ScoreTable::agents() const { return agent_order_; }
std::vector<std::string> ScoreTable::envs() const { return env_order_; }

bool ScoreTable::complete() const {
  for (const auto& a : agent_order_)
    for (const auto& e : env_order_)
      if (cells_.find(std::make_pair(a, e)) == cells_.end()) return false;
  return true;
}

std::map<std::string, double> relative_score(const ScoreTable& table) {
  const auto agents = table.agents();
  const auto envs = table.envs();
  if (agents.size() < 2)
    throw std::invalid_argument("relative_score: need at least two agents");
  if (envs.empty()) throw std::invalid_argument("relative_score: no environments");
  if (!table.complete())
    throw std::invalid_argument("relative_score: every agent must cover every env");

  std::map<std::string, double> out;
  for (const auto& a : agents) out[a] = 0.0;
  for (const auto& e : envs) {
    std::vector<double> iqms;
    iqms.reserve(agents.size());
    for (const auto& a : agents) iqms.push_back(iqm(table.scores(a, e)));
    const double mu = mean(iqms);
    const double sd = sample_std(iqms);
    if (!(sd > 0.0))
      throw std::invalid_argument("relative_score: zero IQM spread in env '" + e + "'");
    for (size_t i = 0; i < agents.size(); ++i) out[agents[i]] += (iqms[i] - mu) / sd;
  }
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least two points");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0))
    throw std::invalid_argument("pearson: constant input");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace jointrl::evalkit
