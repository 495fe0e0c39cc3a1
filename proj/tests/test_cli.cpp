#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "jointrl/config.hpp"
#include "jointrl/report.hpp"

using namespace jointrl;
using namespace jointrl::cli;

namespace {

const char* kDeskConfig = R"(
# desk-scale experiment
name = desk_sac
seeds = 1,2,3
env.episode_len = 30
train.total_env_steps = 50
train.init_explore_steps = 10
train.batch_size = 4
train.buffer_capacity = 64
train.eval_every = 20
train.eval_episodes = 1
encoder.conv_layers = 2
encoder.filters = 4
encoder.strides = 4,2
encoder.repr_dim = 16
sac.mlp_hidden = 32
losses.curl = 0.5
)";

}  // namespace

TEST_CASE("experiment config: parsing, defaults, and validation") {
  ExperimentConfig cfg = parse_experiment_config(kDeskConfig);
  CHECK(cfg.name == "desk_sac");
  CHECK(cfg.seeds == std::vector<uint64_t>({1, 2, 3}));
  CHECK(cfg.train.total_env_steps == 50);
  CHECK(cfg.train.batch_size == 4);
  CHECK(cfg.train.losses.weight_of("curl") == 0.5);
  CHECK(cfg.train.sac.encoder.conv_layers == 2);
  // derived geometry
  CHECK(cfg.train.sac.encoder.input_size == 84);
  CHECK(cfg.train.sac.encoder.input_channels == 9);
  // paper defaults survive where unset
  CHECK(cfg.train.sac.discount == doctest::Approx(0.99f));
  CHECK(cfg.train.sac.init_alpha == doctest::Approx(0.1f));
  CHECK(cfg.train.sac.actor_update_freq == 2);
  CHECK(cfg.train.sac.encoder_tau == doctest::Approx(0.05f));
  CHECK(cfg.train.sac.critic_tau == doctest::Approx(0.01f));
  CHECK(cfg.train.ssl_head.proj_hidden == 256);
  CHECK(cfg.train.ssl_head.proj_out == 128);
  CHECK(cfg.train.init_explore_steps == 10);
}

TEST_CASE("experiment config: unknown keys and bad values name the field") {
  CHECK_THROWS_WITH_AS(parse_experiment_config("nonsense.key = 4\n"),
                       "config: unknown key 'nonsense.key'", ConfigError);
  CHECK_THROWS_WITH_AS(parse_experiment_config("losses.not_a_loss = 1\n"),
                       "config key 'losses.not_a_loss': unknown loss name 'not_a_loss'",
                       ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("train.batch_size = twelve\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("seeds = 1,1\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("env.reward_mode = fuzzy\n"), ConfigError);
}

TEST_CASE("experiment config: round-trips through export") {
  ExperimentConfig cfg = parse_experiment_config(kDeskConfig);
  const std::string text = experiment_config_text(cfg);
  ExperimentConfig again = parse_experiment_config(text);
  CHECK(again.name == cfg.name);
  CHECK(again.seeds == cfg.seeds);
  CHECK(again.train.total_env_steps == cfg.train.total_env_steps);
  CHECK(again.train.losses.weight_of("curl") == cfg.train.losses.weight_of("curl"));
  CHECK(again.train.sac.encoder.resolved_strides() == cfg.train.sac.encoder.resolved_strides());
  CHECK(experiment_config_text(again) == text);
}

TEST_CASE("search config parses and apply_combo closes the schema loop") {
  const char* text = R"(
name = search_demo
search.losses = curl,byol
search.weight_scale = log10
search.population = 8
search.generations = 2
search.seeds = 3
train.total_env_steps = 30
train.init_explore_steps = 10
train.batch_size = 4
train.buffer_capacity = 64
encoder.conv_layers = 2
encoder.filters = 4
encoder.strides = 4,2
)";
  SearchExperimentConfig cfg = parse_search_config(text);
  CHECK(cfg.search.space.loss_names == std::vector<std::string>({"curl", "byol"}));
  CHECK(cfg.search.space.scale == evolve::WeightScale::log10);
  CHECK(cfg.search.objective.seeds == 3);

  ssl::LossCombo combo;
  combo.set("curl", 0.25);
  combo.set("byol", 2.0);
  combo.m1 = 87;
  combo.m2 = 86;
  ExperimentConfig base;
  base.name = "exported";
  base.train.total_env_steps = 30;
  base.train.init_explore_steps = 10;
  base.train.batch_size = 4;
  base.train.buffer_capacity = 64;
  base.train.sac.encoder.conv_layers = 2;
  base.train.sac.encoder.filters = 4;
  base.train.sac.encoder.strides = {4, 2};
  ExperimentConfig applied = apply_combo(base, combo);
  const std::string exported = experiment_config_text(applied);
  ExperimentConfig parsed = parse_experiment_config(exported);
  CHECK(parsed.train.losses.weight_of("curl") == doctest::Approx(0.25));
  CHECK(parsed.train.losses.weight_of("byol") == doctest::Approx(2.0));
  CHECK(parsed.train.aug_online.m == 87);
  CHECK(parsed.train.aug_target.m == 86);

  CHECK_THROWS_AS(parse_search_config("name = x\n"), ConfigError);  // search.losses required
}

TEST_CASE("results CSV parsing and final-score extraction") {
  const std::string csv =
      "agent_name,env,seed,env_step,eval_return\n"
      "a,point_reacher,1,0,-10.0\n"
      "a,point_reacher,1,100,-5.0\n"
      "a,point_reacher,2,0,-12.0\n"
      "a,point_reacher,2,100,-6.0\n"
      "b,point_reacher,1,0,-9.0\n"
      "b,point_reacher,1,100,-1.0\n"
      "b,point_reacher,2,0,-8.5\n"
      "b,point_reacher,2,100,-2.0\n";
  auto rows = parse_results_csv(csv);
  REQUIRE(rows.size() == 8);
  auto table = final_score_table(rows);
  CHECK(table.scores("a", "point_reacher") == std::vector<double>({-5.0, -6.0}));
  CHECK(table.scores("b", "point_reacher") == std::vector<double>({-1.0, -2.0}));

  auto report = build_report(rows);
  REQUIRE(report.files.count("relative_scores.csv") == 1);
  // two agents on one env: relative scores sum to zero
  auto rs_rows = report.files.at("relative_scores.csv");
  double total = 0.0;
  std::istringstream is(rs_rows);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    const size_t comma = line.find(',');
    total += std::stod(line.substr(comma + 1));
  }
  CHECK(total == doctest::Approx(0.0).epsilon(1e-6));

  // curve x-axis spans [0, max step]
  REQUIRE(report.files.count("curve_point_reacher.svg") == 1);
  const std::string& svg = report.files.at("curve_point_reacher.svg");
  CHECK(svg.find(">0<") != std::string::npos);
  CHECK(svg.find(">100<") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);

  // reports regenerate byte-identically
  auto report2 = build_report(rows);
  CHECK(report2.files == report.files);

  CHECK_THROWS(build_report({}));
}

TEST_CASE("summary lines follow the IQM +/- std style") {
  evalkit::ScoreTable t;
  t.set_scores("agent_x", "point_reacher", {100.0, 120.0, 140.0, 160.0});
  const std::string csv = summary_csv(t);
  CHECK(csv.find("agent_x,point_reacher,4,130.000") != std::string::npos);
  CHECK(csv.find("130.0 \xC2\xB1") != std::string::npos);
}

TEST_CASE("nan sentinel rows mark failed runs and are excluded from scores") {
  const std::string csv =
      "agent_name,env,seed,env_step,eval_return\n"
      "a,point_reacher,1,0,-10.0\n"
      "a,point_reacher,1,-1,nan\n"
      "a,point_reacher,2,0,-2.0\n";
  auto rows = parse_results_csv(csv);
  CHECK(rows[1].failed);
  auto table = final_score_table(rows);
  CHECK(table.scores("a", "point_reacher") == std::vector<double>({-10.0, -2.0}));
}

TEST_CASE("probe command produces one report row per checkpoint") {
  // tiny run to create a checkpoint + dataset
  ExperimentConfig cfg = parse_experiment_config(kDeskConfig);
  cfg.train.losses = ssl::LossCombo{};
  cfg.train.seed = 3;
  train::collect_random_dataset(cfg.train, 80, "/tmp/jointrl_cli_probe_data.bin");
  train::JointTrainer trainer(cfg.train);
  trainer.save_checkpoint("/tmp/jointrl_cli_probe_step40.ckpt");

  const std::string csv = probe_checkpoints(cfg.train, {"/tmp/jointrl_cli_probe_step40.ckpt"},
                                            "/tmp/jointrl_cli_probe_data.bin");
  std::istringstream is(csv);
  std::string header, row;
  std::getline(is, header);
  CHECK(header == "update_step,dyn_awareness,diversity,orthogonality,probe_mse");
  REQUIRE(std::getline(is, row));
  CHECK(row.rfind("40,", 0) == 0);  // step parsed from the checkpoint name
  std::remove("/tmp/jointrl_cli_probe_data.bin");
  std::remove("/tmp/jointrl_cli_probe_step40.ckpt");
}
