#pragma once

// Published six-environment IQM columns and the corresponding relative-score
// column, transcribed for the reproduction gate.

#include <array>
#include <string>
#include <vector>

namespace acceptance_data {

struct AgentRow {
  const char* name;
  std::array<double, 6> iqm;  // ball_in_cup, cartpole, cheetah, finger, reacher, walker
  double relative_score;
};

inline const std::vector<AgentRow>& dmc_table() {
  static const std::vector<AgentRow> rows = {
      {"SAC-NoAug", {71.4, 224.8, 120.9, 238.9, 204.8, 99.6}, -8.868},
      {"SAC-Aug(88)", {510.8, 714.2, 354.5, 771.2, 347.9, 192.2}, 0.160},
      {"SAC-Aug(100)", {541.4, 563.4, 172.1, 724.6, 654.4, 422.1}, 0.986},
      {"RAD", {879.9, 786.4, 387.9, 910.4, 508.8, 522.1}, 5.310},
      {"DrQ", {914.9, 692.2, 360.4, 935.6, 713.7, 523.9}, 6.028},
      {"DrQ(88)", {762.5, 508.2, 331.7, 877.6, 395.5, 119.2}, 0.154},
      {"DrQ(100)", {907.6, 675.5, 318.8, 940.0, 627.0, 302.9}, 3.898},
      {"CURL", {730.0, 471.5, 215.1, 717.8, 569.8, 442.6}, 1.128},
      {"CURL-w-Action", {888.4, 537.8, 247.7, 604.2, 521.3, 439.9}, 1.452},
      {"CURL-w-Critic", {690.9, 603.8, 233.7, 657.0, 536.3, 443.0}, 1.320},
      {"BYOL", {667.7, 507.2, 70.7, 547.3, 403.7, 449.0}, -1.594},
      {"DINO", {916.9, 686.0, 198.3, 923.1, 686.2, 414.6}, 3.957},
      {"SimSiam", {82.6, 67.4, 0.7, 7.6, 72.3, 34.1}, -12.537},
      {"RotationCLS", {157.9, 336.4, 209.7, 801.9, 540.3, 537.0}, -0.718},
      {"ShuffleCLS", {112.2, 28.8, 0.9, 53.0, 108.3, 127.3}, -11.701},
      {"SAC+AE", {616.1, 388.8, 291.8, 799.0, 481.3, 402.6}, 0.566},
      {"MAE", {251.1, 372.8, 282.0, 669.5, 336.9, 489.7}, -1.635},
      {"Extract-Action", {871.0, 493.9, 172.3, 870.4, 578.3, 484.8}, 2.297},
      {"Extract-Reward", {598.2, 469.8, 302.1, 828.7, 753.2, 522.2}, 3.266},
      {"Guess-Action", {724.6, 495.7, 204.6, 669.9, 578.8, 410.6}, 0.813},
      {"Guess-Future", {82.4, 146.6, 0.7, 786.5, 323.4, 74.1}, -7.318},
      {"Predict-Future", {121.5, 252.7, 0.7, 796.7, 365.3, 112.7}, -6.201},
      {"Predict-Reward", {672.8, 517.8, 279.1, 837.6, 796.2, 520.1}, 3.826},
      {"Extract-AR", {822.2, 592.9, 225.8, 783.0, 678.7, 458.4}, 3.042},
      {"Guess-AF", {329.8, 140.7, 0.9, 880.0, 382.9, 494.7}, -3.421},
      {"Predict-FR", {750.3, 723.2, 12.4, 861.5, 636.1, 270.0}, 0.821},
      {"ELo-SAC", {831.3, 798.7, 354.0, 835.7, 485.2, 532.1}, 4.567},
      {"ELo-SACv2", {864.6, 679.8, 414.0, 844.0, 513.9, 555.4}, 4.901},
      {"ELo-SACv3", {851.0, 612.6, 313.9, 914.7, 625.2, 697.4}, 5.502},
  };
  return rows;
}

inline const std::array<const char*, 6>& dmc_envs() {
  static const std::array<const char*, 6> envs = {"ball_in_cup",  "cartpole", "cheetah",
                                                  "finger", "reacher", "walker"};
  return envs;
}

}  // namespace acceptance_data
