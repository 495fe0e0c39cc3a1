#include "jointrl/evolve.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

#include "jointrl/stats.hpp"

namespace jointrl::evolve {

using nlohmann::json;

SearchSpace SearchSpace::linear_space(std::vector<std::string> names) {
  SearchSpace s;
  s.loss_names = std::move(names);
  s.scale = WeightScale::linear;
  s.w_lo = 0.0;
  s.w_hi = 10.0;
  return s;
}

SearchSpace SearchSpace::log_space(std::vector<std::string> names) {
  SearchSpace s;
  s.loss_names = std::move(names);
  s.scale = WeightScale::log10;
  s.w_lo = -4.0;
  s.w_hi = 4.0;
  return s;
}

void SearchSpace::validate() const {
  if (loss_names.empty()) throw std::invalid_argument("search space: no losses");
  for (const auto& name : loss_names)
    if (!ssl::is_registered_loss(name))
      throw std::invalid_argument("search space: unknown loss '" + name + "'");
  if (!(w_lo < w_hi) || !(m_lo < m_hi))
    throw std::invalid_argument("search space: empty range");
}

void SearchSpace::check_position(const std::vector<double>& position) const {
  if (static_cast<long>(position.size()) != dims())
    throw std::invalid_argument("search space: position dimension mismatch");
  for (long d = 0; d < dims(); ++d)
    if (position[static_cast<size_t>(d)] < lo(d) - 1e-9 ||
        position[static_cast<size_t>(d)] > hi(d) + 1e-9)
      throw std::invalid_argument("search space: position outside bounds");
}

ssl::LossCombo SearchSpace::combo_at(const std::vector<double>& position) const {
  check_position(position);
  ssl::LossCombo combo;
  for (size_t i = 0; i < loss_names.size(); ++i) {
    const double raw = position[i];
    combo.set(loss_names[i], scale == WeightScale::log10 ? std::pow(10.0, raw) : raw);
  }
  combo.m1 = static_cast<int>(std::lround(position[loss_names.size()]));
  combo.m2 = static_cast<int>(std::lround(position[loss_names.size() + 1]));
  return combo;
}

std::vector<Particle> init_population(const SearchSpace& space, InitStrategy strategy, long size,
                                      RandomStream& rng) {
  space.validate();
  const long n_losses = static_cast<long>(space.loss_names.size());
  std::vector<std::vector<double>> seeded;
  const double one = space.scale == WeightScale::log10 ? 0.0 : 1.0;  // weight 1
  const double zero = space.w_lo;                                    // weight 0 (or 1e-4 in log)
  if (strategy == InitStrategy::v1) {
    for (long k = 0; k < n_losses; ++k) {
      std::vector<double> pos(static_cast<size_t>(space.dims()), zero);
      pos[static_cast<size_t>(k)] = one;
      pos[static_cast<size_t>(n_losses)] = 88.0;
      pos[static_cast<size_t>(n_losses) + 1] = 88.0;
      seeded.push_back(std::move(pos));
    }
  } else if (strategy == InitStrategy::v2) {
    for (double m : {86.0, 88.0, 92.0, 100.0, 116.0}) {
      for (long k = 0; k < n_losses; ++k) {
        std::vector<double> pos(static_cast<size_t>(space.dims()), zero);
        pos[static_cast<size_t>(k)] = one;
        pos[static_cast<size_t>(n_losses)] = m;
        pos[static_cast<size_t>(n_losses) + 1] = m;
        seeded.push_back(std::move(pos));
      }
    }
  }
  if (size < static_cast<long>(seeded.size()))
    throw std::invalid_argument("init_population: population smaller than the seeded particles (" +
                                std::to_string(seeded.size()) + ")");
  std::vector<Particle> particles;
  particles.reserve(static_cast<size_t>(size));
  for (long i = 0; i < size; ++i) {
    Particle p;
    p.id = static_cast<int>(i);
    if (i < static_cast<long>(seeded.size())) {
      p.position = seeded[static_cast<size_t>(i)];
    } else {
      p.position.resize(static_cast<size_t>(space.dims()));
      for (long d = 0; d < space.dims(); ++d)
        p.position[static_cast<size_t>(d)] = rng.uniform(space.lo(d), space.hi(d));
    }
    p.velocity.assign(static_cast<size_t>(space.dims()), 0.0);
    p.best_position = p.position;
    particles.push_back(std::move(p));
  }
  return particles;
}

void pso_step(std::vector<Particle>& particles, const std::vector<double>& global_best,
              const SearchSpace& space, RandomStream& rng, const PsoParams& params) {
  for (auto& p : particles) {
    if (!p.evaluated)
      throw std::logic_error("pso_step: particle " + std::to_string(p.id) +
                             " has no evaluated personal best");
    for (long d = 0; d < space.dims(); ++d) {
      const size_t di = static_cast<size_t>(d);
      const double r1 = rng.uniform(), r2 = rng.uniform();
      double v = params.omega * p.velocity[di] +
                 params.c1 * r1 * (p.best_position[di] - p.position[di]) +
                 params.c2 * r2 * (global_best[di] - p.position[di]);
      const double vmax = params.velocity_clamp * (space.hi(d) - space.lo(d));
      v = std::clamp(v, -vmax, vmax);
      p.velocity[di] = v;
      p.position[di] = std::clamp(p.position[di] + v, space.lo(d), space.hi(d));
    }
  }
}

void SearchObjective::validate() const {
  if (envs.empty()) throw std::invalid_argument("objective: no environments");
  if (seeds < 3) throw std::invalid_argument("objective: need at least 3 seeds");
  if (mode == Mode::multi_env_normalized)
    for (const auto& env : envs)
      if (!reference_scores.count(env))
        throw std::invalid_argument("objective: missing reference score for env '" + env + "'");
}

std::string EvalCache::key(const std::vector<double>& position, uint64_t seed,
                           const std::string& env) {
  json j = json::array();
  for (double v : position) j.push_back(v);
  return j.dump() + "|" + std::to_string(seed) + "|" + env;
}

bool EvalCache::lookup(const std::string& k, double* score, bool* failed) const {
  auto it = map_.find(k);
  if (it == map_.end()) return false;
  *score = it->second.first;
  *failed = it->second.second;
  return true;
}

void EvalCache::store(const std::string& k, double score, bool failed) {
  map_[k] = {score, failed};
}

ParticleEvaluation evaluate_particle(const std::vector<double>& position,
                                     const SearchSpace& space, const SearchObjective& objective,
                                     const RunFn& run_fn, EvalCache& cache, uint64_t seed_base) {
  objective.validate();
  const ssl::LossCombo combo = space.combo_at(position);
  ParticleEvaluation out;
  std::vector<double> env_objectives;
  for (const auto& env : objective.envs) {
    std::vector<double> scores;
    for (int s = 0; s < objective.seeds; ++s) {
      const uint64_t seed = seed_base + static_cast<uint64_t>(s);
      const std::string k = EvalCache::key(position, seed, env);
      double score = 0.0;
      bool failed = false;
      if (!cache.lookup(k, &score, &failed)) {
        RunOutcome outcome = run_fn(combo, seed, env);
        failed = outcome.failed;
        score = outcome.score;
        if (failed) {
          auto it = objective.min_scores.find(env);
          score = it != objective.min_scores.end() ? it->second : score;
        }
        cache.store(k, score, failed);
      }
      if (failed) out.failed_seeds.push_back(seed);
      scores.push_back(score);
    }
    out.per_seed[env] = scores;
    double env_obj = evalkit::iqm(scores);
    if (objective.mode == SearchObjective::Mode::multi_env_normalized)
      env_obj /= objective.reference_scores.at(env);
    env_objectives.push_back(env_obj);
  }
  out.objective = evalkit::mean(env_objectives);
  return out;
}

namespace {

json position_json(const SearchSpace& space, const std::vector<double>& position) {
  json j = json::object();
  for (size_t i = 0; i < space.loss_names.size(); ++i)
    j["w:" + space.loss_names[i]] = position[i];
  j["m1"] = position[space.loss_names.size()];
  j["m2"] = position[space.loss_names.size() + 1];
  return j;
}

json particle_state_json(const Particle& p) {
  return json{{"id", p.id},
              {"position", p.position},
              {"velocity", p.velocity},
              {"best_position", p.best_position},
              {"best_objective", p.best_objective}};
}

void particle_state_load(const json& j, Particle& p) {
  p.id = j.at("id").get<int>();
  p.position = j.at("position").get<std::vector<double>>();
  p.velocity = j.at("velocity").get<std::vector<double>>();
  p.best_position = j.at("best_position").get<std::vector<double>>();
  p.best_objective = j.at("best_objective").get<double>();
  p.evaluated = true;
}

struct LogState {
  std::vector<std::string> kept_lines;  // up to and including the last complete generation
  long last_generation = -1;
  std::vector<Particle> particles;
  std::vector<double> global_best;
  double global_best_objective = 0.0;
  bool has_global_best = false;
  std::string rng_state;
  EvalCache cache;
  // every logged evaluation, for the top-10 re-examination
  std::vector<std::pair<double, std::vector<double>>> eval_history;
};

LogState read_log(const std::string& path, const SearchSpace& space) {
  LogState st;
  std::ifstream is(path);
  if (!is) return st;
  std::string line;
  std::vector<std::string> pending;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) break;  // partial trailing line
    const std::string type = j.value("type", "");
    pending.push_back(line);
    if (type == "eval") {
      const auto position = j.at("position_raw").get<std::vector<double>>();
      const double objective = j.at("objective").get<double>();
      st.eval_history.emplace_back(objective, position);
      for (const auto& [env, scores] : j.at("per_seed").items()) {
        const auto seed_list = j.at("seeds").get<std::vector<uint64_t>>();
        const auto score_list = scores.get<std::vector<double>>();
        const auto failed = j.value("failed_seeds", std::vector<uint64_t>{});
        for (size_t s = 0; s < seed_list.size(); ++s) {
          const bool was_failed =
              std::find(failed.begin(), failed.end(), seed_list[s]) != failed.end();
          st.cache.store(EvalCache::key(position, seed_list[s], env), score_list[s], was_failed);
        }
      }
    } else if (type == "generation") {
      st.last_generation = j.at("generation").get<long>();
      st.particles.clear();
      for (const auto& pj : j.at("particles")) {
        Particle p;
        particle_state_load(pj, p);
        st.particles.push_back(std::move(p));
      }
      st.global_best = j.at("global_best").get<std::vector<double>>();
      st.global_best_objective = j.at("global_best_objective").get<double>();
      st.has_global_best = true;
      st.rng_state = j.at("rng_state").get<std::string>();
      st.kept_lines = pending;  // everything up to this complete generation
    }
  }
  (void)space;
  return st;
}

}  // namespace

SearchResult run_search(const SearchConfig& cfg, const RunFn& run_fn,
                        const std::string& log_path) {
  cfg.space.validate();
  cfg.objective.validate();
  if (cfg.population < 1) throw std::invalid_argument("run_search: population must be >= 1");

  LogState st = read_log(log_path, cfg.space);
  RandomStream rng(mix_seed(cfg.seed, 0xE70));
  std::vector<Particle> particles;
  std::vector<double> global_best;
  double global_best_objective = 0.0;
  bool has_best = false;
  long start_gen = 0;

  std::ofstream log;
  if (st.last_generation >= 0) {
    // resume: rewrite the kept prefix, restore swarm + rng, continue
    std::ofstream rewrite(log_path, std::ios::trunc);
    for (const auto& l : st.kept_lines) rewrite << l << '\n';
    rewrite.close();
    particles = std::move(st.particles);
    global_best = st.global_best;
    global_best_objective = st.global_best_objective;
    has_best = st.has_global_best;
    rng.load_state(st.rng_state);
    start_gen = st.last_generation + 1;
    log.open(log_path, std::ios::app);
  } else {
    log.open(log_path, std::ios::trunc);
    particles = init_population(cfg.space, cfg.init, cfg.population, rng);
  }
  if (!log) throw std::runtime_error("run_search: cannot open log " + log_path);

  std::vector<std::pair<double, std::vector<double>>> eval_history = std::move(st.eval_history);
  std::vector<uint64_t> seed_list;
  for (int s = 0; s < cfg.objective.seeds; ++s)
    seed_list.push_back(1 + static_cast<uint64_t>(s));

  for (long gen = start_gen; gen <= cfg.generations; ++gen) {
    if (gen > 0) pso_step(particles, global_best, cfg.space, rng, cfg.pso);
    for (auto& p : particles) {
      ParticleEvaluation ev =
          evaluate_particle(p.position, cfg.space, cfg.objective, run_fn, st.cache, 1);
      eval_history.emplace_back(ev.objective, p.position);
      json rec{{"type", "eval"},
               {"generation", gen},
               {"particle_id", p.id},
               {"position", position_json(cfg.space, p.position)},
               {"position_raw", p.position},
               {"seeds", seed_list},
               {"per_seed", ev.per_seed},
               {"objective", ev.objective}};
      if (!ev.failed_seeds.empty()) rec["failed_seeds"] = ev.failed_seeds;
      log << rec.dump() << '\n';
      // ties keep the earlier entrant: strict improvement only
      if (!p.evaluated || ev.objective > p.best_objective) {
        p.best_objective = ev.objective;
        p.best_position = p.position;
        p.evaluated = true;
      }
    }
    for (const auto& p : particles) {
      if (!has_best || p.best_objective > global_best_objective) {
        global_best_objective = p.best_objective;
        global_best = p.best_position;
        has_best = true;
      }
    }
    json gen_rec{{"type", "generation"},
                 {"generation", gen},
                 {"rng_state", rng.save_state()},
                 {"global_best", global_best},
                 {"global_best_objective", global_best_objective},
                 {"particles", json::array()}};
    for (const auto& p : particles) gen_rec["particles"].push_back(particle_state_json(p));
    log << gen_rec.dump() << '\n';
    log.flush();
  }

  // Final answer: re-examine the top-10 logged positions on a disjoint
  // validation seed set and export the best of them.
  std::stable_sort(eval_history.begin(), eval_history.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::vector<double>> top;
  for (const auto& [obj, pos] : eval_history) {
    if (std::find(top.begin(), top.end(), pos) == top.end()) top.push_back(pos);
    if (static_cast<int>(top.size()) >= cfg.top_k_reexamined) break;
  }
  SearchResult result;
  result.generations_run = cfg.generations;
  double best_val = 0.0;
  bool have = false;
  for (const auto& pos : top) {
    ParticleEvaluation ev = evaluate_particle(pos, cfg.space, cfg.objective, run_fn, st.cache,
                                              1 + cfg.validation_seed_offset);
    json rec{{"type", "reexamination"},
             {"position", position_json(cfg.space, pos)},
             {"position_raw", pos},
             {"validation_objective", ev.objective}};
    log << rec.dump() << '\n';
    if (!have || ev.objective > best_val) {
      best_val = ev.objective;
      result.best_position = pos;
      have = true;
    }
  }
  result.best_combo = cfg.space.combo_at(result.best_position);
  result.validation_objective = best_val;
  result.best_objective = global_best_objective;
  json final_rec{{"type", "result"},
                 {"best_position", result.best_position},
                 {"position", position_json(cfg.space, result.best_position)},
                 {"search_objective", result.best_objective},
                 {"validation_objective", result.validation_objective}};
  log << final_rec.dump() << '\n';
  return result;
}

}  // namespace jointrl::evolve
