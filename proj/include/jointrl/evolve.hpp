#pragma once

#include <functional>
#include <map>

#include "jointrl/ssl.hpp"

namespace jointrl::evolve {

enum class WeightScale { linear, log10 };

// Position layout: one coordinate per loss weight, then m1, m2. Log-scale
// particles move in exponent space; weights become 10^x at evaluation time.
struct SearchSpace {
  std::vector<std::string> loss_names;
  WeightScale scale = WeightScale::linear;
  double w_lo = 0.0, w_hi = 10.0;    // log10 scale uses [-4, 4]
  double m_lo = 84.0, m_hi = 116.0;

  static SearchSpace linear_space(std::vector<std::string> names);
  static SearchSpace log_space(std::vector<std::string> names);

  long dims() const { return static_cast<long>(loss_names.size()) + 2; }
  double lo(long d) const { return d < static_cast<long>(loss_names.size()) ? w_lo : m_lo; }
  double hi(long d) const { return d < static_cast<long>(loss_names.size()) ? w_hi : m_hi; }
  // Magnitudes are continuous in the swarm and rounded only here.
  ssl::LossCombo combo_at(const std::vector<double>& position) const;
  void validate() const;
  void check_position(const std::vector<double>& position) const;
};

struct Particle {
  int id = 0;
  std::vector<double> position, velocity;
  std::vector<double> best_position;
  double best_objective = 0.0;
  bool evaluated = false;
};

enum class InitStrategy { v1, v2, random_init };

// v1: one-hot weight particles at m=88; v2: Cartesian product of the
// magnitude set {86,88,92,100,116} (m1=m2) with the one-hot weight set;
// remaining particles random. All velocities start at zero.
std::vector<Particle> init_population(const SearchSpace& space, InitStrategy strategy, long size,
                                      RandomStream& rng);

struct PsoParams {
  double omega = 0.729;
  double c1 = 1.49445;
  double c2 = 1.49445;
  double velocity_clamp = 0.5;  // fraction of each dimension's range
};

// v <- w*v + c1*r1*(pbest - x) + c2*r2*(gbest - x); x <- clamp(x + v).
void pso_step(std::vector<Particle>& particles, const std::vector<double>& global_best,
              const SearchSpace& space, RandomStream& rng, const PsoParams& params = {});

struct SearchObjective {
  enum class Mode { single_env_iqm, multi_env_normalized };
  Mode mode = Mode::single_env_iqm;
  std::vector<std::string> envs = {"point_reacher"};
  int seeds = 5;
  std::map<std::string, double> reference_scores;  // per-env normalizers (v3)
  std::map<std::string, double> min_scores;        // failed-run penalty per env

  void validate() const;
};

struct RunOutcome {
  double score = 0.0;
  bool failed = false;
};
using RunFn = std::function<RunOutcome(const ssl::LossCombo&, uint64_t seed, const std::string&)>;

// Deterministic (position, seed, env) -> score memo; searches re-visit
// positions and runs are expensive.
class EvalCache {
 public:
  static std::string key(const std::vector<double>& position, uint64_t seed,
                         const std::string& env);
  bool lookup(const std::string& k, double* score, bool* failed) const;
  void store(const std::string& k, double score, bool failed);
  size_t size() const { return map_.size(); }

 private:
  std::map<std::string, std::pair<double, bool>> map_;
};

struct ParticleEvaluation {
  double objective = 0.0;
  // per env: per-seed scores (post-penalty), aligned with seed list
  std::map<std::string, std::vector<double>> per_seed;
  std::vector<uint64_t> failed_seeds;
};

ParticleEvaluation evaluate_particle(const std::vector<double>& position,
                                     const SearchSpace& space, const SearchObjective& objective,
                                     const RunFn& run_fn, EvalCache& cache,
                                     uint64_t seed_base = 1);

struct SearchConfig {
  SearchSpace space;
  SearchObjective objective;
  InitStrategy init = InitStrategy::v1;
  long population = 50;
  long generations = 15;
  uint64_t seed = 1;
  PsoParams pso;
  uint64_t validation_seed_offset = 1000;  // top-10 re-examination seeds
  int top_k_reexamined = 10;
};

struct SearchResult {
  std::vector<double> best_position;
  ssl::LossCombo best_combo;
  double best_objective = 0.0;
  double validation_objective = 0.0;
  long generations_run = 0;
};

// Full search: init, evaluate per generation, PSO steps, per-line JSONL log.
// If log_path already holds complete generations, the search resumes after
// the last one and the final log is identical to an uninterrupted run.
SearchResult run_search(const SearchConfig& cfg, const RunFn& run_fn, const std::string& log_path);

}  // namespace jointrl::evolve
