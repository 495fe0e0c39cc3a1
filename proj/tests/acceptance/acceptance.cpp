// Acceptance gate: one check per shipped guarantee, each printing a
// [PASS]/[FAIL] line. Run with --criterion N for a single gate, or with no
// arguments for the full battery.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>

#include "../fd_check.hpp"
#include "jointrl/config.hpp"
#include "jointrl/evolve.hpp"
#include "jointrl/report.hpp"
#include "jointrl/repr_metrics.hpp"
#include "jointrl/ssl.hpp"
#include "jointrl/stats.hpp"
#include "jointrl/trainer.hpp"
#include "published_scores.hpp"

using namespace jointrl;
using jointrl::testing::max_rel_grad_err;

namespace {

using Clock = std::chrono::steady_clock;

double minutes_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count() / 60.0;
}

struct Gate {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

// ---------------------------------------------------------------------------
// criterion 1: relative-score reproduction from the published IQM columns
// ---------------------------------------------------------------------------

Gate criterion1() {
  Gate g;
  evalkit::ScoreTable table;
  for (const auto& row : acceptance_data::dmc_table())
    for (size_t e = 0; e < 6; ++e)
      table.set_scores(row.name, acceptance_data::dmc_envs()[e], {row.iqm[e]});
  auto rs = evalkit::relative_score(table);
  double worst = 0.0;
  std::string worst_agent;
  for (const auto& row : acceptance_data::dmc_table()) {
    const double dev = std::abs(rs.at(row.name) - row.relative_score);
    if (dev > worst) {
      worst = dev;
      worst_agent = row.name;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "max deviation %.4f (%s), tolerance 0.1", worst,
                worst_agent.c_str());
  g.note(buf);
  g.require(worst <= 0.1, "published relative scores not reproduced");
  return g;
}

// ---------------------------------------------------------------------------
// criterion 2: loss oracles — straight-line recomputation + finite differences
// ---------------------------------------------------------------------------

double naive_info_nce_dot(const TensorD& q, const TensorD& k, double tau) {
  const long N = q.rows(), D = q.cols();
  double loss = 0.0;
  for (long i = 0; i < N; ++i) {
    std::vector<double> logits(static_cast<size_t>(N));
    for (long j = 0; j < N; ++j) {
      double dot = 0.0;
      for (long d = 0; d < D; ++d) dot += q.at2(i, d) * k.at2(j, d);
      logits[static_cast<size_t>(j)] = dot / tau;
    }
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    loss += -(logits[static_cast<size_t>(i)] - mx - std::log(z));
  }
  return loss / static_cast<double>(N);
}

double naive_info_nce_bilinear(const TensorD& q, const TensorD& W, const TensorD& k) {
  const long N = q.rows(), D = q.cols();
  TensorD qw({N, D});
  for (long i = 0; i < N; ++i)
    for (long d = 0; d < D; ++d) {
      double acc = 0.0;
      for (long e = 0; e < D; ++e) acc += q.at2(i, e) * W.at2(e, d);
      qw.at2(i, d) = acc;
    }
  return naive_info_nce_dot(qw, k, 1.0);
}

double naive_byol(const TensorD& p, const TensorD& z, const TensorD& pn, const TensorD& zn) {
  auto term = [](const TensorD& a, const TensorD& b) {
    double total = 0.0;
    for (long i = 0; i < a.rows(); ++i) {
      double na = 0, nb = 0, dot = 0;
      for (long d = 0; d < a.cols(); ++d) {
        na += a.at2(i, d) * a.at2(i, d);
        nb += b.at2(i, d) * b.at2(i, d);
        dot += a.at2(i, d) * b.at2(i, d);
      }
      total += 2.0 - 2.0 * dot / (std::sqrt(na) * std::sqrt(nb));
    }
    return total / static_cast<double>(a.rows());
  };
  return 0.5 * (term(p, z) + term(pn, zn));
}

double naive_simsiam(const TensorD& h, const TensorD& ho, const TensorD& z, const TensorD& zo) {
  auto cos_mean = [](const TensorD& a, const TensorD& b) {
    double total = 0.0;
    for (long i = 0; i < a.rows(); ++i) {
      double na = 0, nb = 0, dot = 0;
      for (long d = 0; d < a.cols(); ++d) {
        na += a.at2(i, d) * a.at2(i, d);
        nb += b.at2(i, d) * b.at2(i, d);
        dot += a.at2(i, d) * b.at2(i, d);
      }
      total += dot / (std::sqrt(na) * std::sqrt(nb));
    }
    return total / static_cast<double>(a.rows());
  };
  return -0.5 * (cos_mean(h, zo) + cos_mean(ho, z));
}

double naive_dino_pair(const TensorD& student, const TensorD& teacher, const TensorD& center,
                       double ts, double tt) {
  const long N = student.rows(), K = student.cols();
  double loss = 0.0;
  for (long i = 0; i < N; ++i) {
    std::vector<double> pt(static_cast<size_t>(K)), ls(static_cast<size_t>(K));
    double mx_t = -1e300, mx_s = -1e300;
    for (long k = 0; k < K; ++k) {
      pt[static_cast<size_t>(k)] = (teacher.at2(i, k) - center[k]) / tt;
      ls[static_cast<size_t>(k)] = student.at2(i, k) / ts;
      mx_t = std::max(mx_t, pt[static_cast<size_t>(k)]);
      mx_s = std::max(mx_s, ls[static_cast<size_t>(k)]);
    }
    double zt = 0, zs = 0;
    for (long k = 0; k < K; ++k) {
      zt += std::exp(pt[static_cast<size_t>(k)] - mx_t);
      zs += std::exp(ls[static_cast<size_t>(k)] - mx_s);
    }
    for (long k = 0; k < K; ++k) {
      const double p = std::exp(pt[static_cast<size_t>(k)] - mx_t) / zt;
      const double log_s = ls[static_cast<size_t>(k)] - mx_s - std::log(zs);
      loss -= p * log_s;
    }
  }
  return loss / static_cast<double>(N);
}

double naive_ce(const TensorD& logits, const std::vector<long>& labels) {
  double loss = 0.0;
  for (long i = 0; i < logits.rows(); ++i) {
    double mx = -1e300;
    for (long k = 0; k < logits.cols(); ++k) mx = std::max(mx, logits.at2(i, k));
    double z = 0.0;
    for (long k = 0; k < logits.cols(); ++k) z += std::exp(logits.at2(i, k) - mx);
    loss -= logits.at2(i, labels[static_cast<size_t>(i)]) - mx - std::log(z);
  }
  return loss / static_cast<double>(logits.rows());
}

double naive_bce(const TensorD& logits, const std::vector<double>& y) {
  double loss = 0.0;
  for (long i = 0; i < logits.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-logits[i]));
    loss -= y[static_cast<size_t>(i)] * std::log(p) +
            (1.0 - y[static_cast<size_t>(i)]) * std::log(1.0 - p);
  }
  return loss / static_cast<double>(logits.size());
}

double naive_mse(const TensorD& a, const TensorD& b) {
  double s = 0.0;
  for (long i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

Gate criterion2() {
  Gate g;
  RandomStream rng(0xACC2);
  auto rel_err = [](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
  };
  auto check_loss = [&](const char* name, double got, double expect,
                        std::vector<VarD> leaves, const std::function<VarD()>& build) {
    g.require(rel_err(got, expect) < 1e-6,
              std::string(name) + " straight-line mismatch (rel " +
                  std::to_string(rel_err(got, expect)) + ")");
    const double fd = max_rel_grad_err(std::move(leaves), build);
    g.require(fd < 1e-4, std::string(name) + " finite-difference failure (" +
                             std::to_string(fd) + ")");
  };

  {  // info_nce, dot-temperature mode
    VarD q = VarD::leaf(TensorD::uniform({5, 4}, -1, 1, rng), true);
    VarD k = VarD::leaf(TensorD::uniform({5, 4}, -1, 1, rng), false);
    auto build = [&] { return ssl::info_nce(q, k, 0.37); };
    check_loss("info_nce(dot)", build().item(), naive_info_nce_dot(q.value(), k.value(), 0.37),
               {q}, build);
  }
  {  // info_nce, bilinear mode (curl / curl_w_*)
    VarD q = VarD::leaf(TensorD::uniform({5, 4}, -1, 1, rng), true);
    VarD k = VarD::leaf(TensorD::uniform({5, 4}, -1, 1, rng), false);
    VarD W = VarD::leaf(TensorD::uniform({4, 4}, -1, 1, rng), true);
    auto build = [&] { return ssl::info_nce(q, k, ssl::InfoNceMode::bilinear, W, 0.0); };
    check_loss("info_nce(bilinear)", build().item(),
               naive_info_nce_bilinear(q.value(), W.value(), k.value()), {q, W}, build);
  }
  {  // byol
    VarD p = VarD::leaf(TensorD::uniform({4, 6}, 0.1, 1.0, rng), true);
    VarD z = VarD::leaf(TensorD::uniform({4, 6}, 0.1, 1.0, rng), false);
    VarD pn = VarD::leaf(TensorD::uniform({4, 6}, 0.1, 1.0, rng), true);
    VarD zn = VarD::leaf(TensorD::uniform({4, 6}, 0.1, 1.0, rng), false);
    auto build = [&] { return ssl::byol_loss(p, z, pn, zn); };
    check_loss("byol", build().item(), naive_byol(p.value(), z.value(), pn.value(), zn.value()),
               {p, pn}, build);
  }
  {  // simsiam
    VarD h = VarD::leaf(TensorD::uniform({4, 6}, 0.1, 1.0, rng), true);
    VarD ho = VarD::leaf(TensorD::uniform({4, 6}, 0.1, 1.0, rng), true);
    VarD z = VarD::leaf(TensorD::uniform({4, 6}, 0.1, 1.0, rng), false);
    VarD zo = VarD::leaf(TensorD::uniform({4, 6}, 0.1, 1.0, rng), false);
    auto build = [&] { return ssl::simsiam_loss(h, ho, z, zo); };
    check_loss("simsiam", build().item(),
               naive_simsiam(h.value(), ho.value(), z.value(), zo.value()), {h, ho}, build);
  }
  {  // dino, including the center update
    VarD s1 = VarD::leaf(TensorD::uniform({4, 5}, -1, 1, rng), true);
    VarD t1 = VarD::leaf(TensorD::uniform({4, 5}, -1, 1, rng), false);
    VarD s2 = VarD::leaf(TensorD::uniform({4, 5}, -1, 1, rng), true);
    VarD t2 = VarD::leaf(TensorD::uniform({4, 5}, -1, 1, rng), false);
    TensorD center = TensorD::uniform({1, 5}, -0.3, 0.3, rng);
    auto build = [&] {
      return ssl::dino_loss(s1, t1, s2, t2, center, 0.1, 0.04, 0.9).loss;
    };
    const double naive = 0.5 * (naive_dino_pair(s1.value(), t1.value(), center, 0.1, 0.04) +
                                naive_dino_pair(s2.value(), t2.value(), center, 0.1, 0.04));
    check_loss("dino", build().item(), naive, {s1, s2}, build);
    auto res = ssl::dino_loss(s1, t1, s2, t2, center, 0.1, 0.04, 0.9);
    for (long k = 0; k < 5; ++k) {
      double mean_t = 0.0;
      for (long i = 0; i < 4; ++i) mean_t += t1.value().at2(i, k) + t2.value().at2(i, k);
      mean_t /= 8.0;
      const double expect = 0.9 * center[k] + 0.1 * mean_t;
      g.require(rel_err(res.new_center[k], expect) < 1e-9, "dino center update mismatch");
    }
  }
  {  // rotation_cls / classification path
    VarD logits = VarD::leaf(TensorD::uniform({6, 4}, -1, 1, rng), true);
    std::vector<long> labels = {0, 3, 1, 2, 2, 0};
    auto build = [&] { return cross_entropy_rows(logits, labels); };
    check_loss("rotation_cls(ce)", build().item(), naive_ce(logits.value(), labels), {logits},
               build);
  }
  {  // shuffle_cls / binary classification path
    VarD logits = VarD::leaf(TensorD::uniform({6, 1}, -1.5, 1.5, rng), true);
    std::vector<double> labels = {1, 0, 0, 1, 1, 0};
    auto build = [&] { return bce_with_logits(logits, labels); };
    check_loss("shuffle_cls(bce)", build().item(), naive_bce(logits.value(), labels), {logits},
               build);
  }
  {  // ae (regularized reconstruction, with the upper-left crop rule)
    VarD recon = VarD::leaf(TensorD::uniform({2, 1, 3, 3}, -1, 1, rng), true);
    VarD target = VarD::leaf(TensorD::uniform({2, 1, 4, 4}, -1, 1, rng), false);
    VarD z = VarD::leaf(TensorD::uniform({2, 5}, -1, 1, rng), true);
    VarD w = VarD::leaf(TensorD::uniform({3, 3}, -1, 1, rng), true);
    auto build = [&] { return ssl::rae_loss_terms(recon, target, z, {w}, 0.01, 0.002); };
    // straight-line: crop the target to 3x3, mse + penalties
    double se = 0.0;
    for (long b = 0; b < 2; ++b)
      for (long r = 0; r < 3; ++r)
        for (long c = 0; c < 3; ++c) {
          const double d =
              recon.value()[(b * 9) + r * 3 + c] - target.value()[(b * 16) + r * 4 + c];
          se += d * d;
        }
    double zpen = 0.0;
    for (long i = 0; i < z.value().size(); ++i) zpen += z.value()[i] * z.value()[i];
    double wpen = 0.0;
    for (long i = 0; i < 9; ++i) wpen += w.value()[i] * w.value()[i];
    const double naive = se / 18.0 + 0.01 * (zpen / 2.0) + 0.002 * wpen;
    check_loss("ae(rae)", build().item(), naive, {recon, z, w}, build);
  }
  {  // mae (masked reconstruction)
    VarD recon = VarD::leaf(TensorD::uniform({2, 1, 4, 4}, -1, 1, rng), true);
    VarD target = VarD::leaf(TensorD::uniform({2, 1, 4, 4}, -1, 1, rng), false);
    TensorD mask({2, 1, 4, 4});
    long count = 0;
    for (long i = 0; i < 32; ++i) {
      mask[i] = (i % 3 == 0) ? 1.0 : 0.0;
      count += mask[i] > 0;
    }
    auto build = [&] { return ssl::masked_mse(recon, target, mask); };
    double se = 0.0;
    for (long i = 0; i < 32; ++i)
      if (mask[i] > 0) se += (recon.value()[i] - target.value()[i]) *
                             (recon.value()[i] - target.value()[i]);
    check_loss("mae(masked_mse)", build().item(), se / static_cast<double>(count), {recon}, build);
  }
  {  // context losses: single, concatenated, and balanced forms
    VarD pred_a = VarD::leaf(TensorD::uniform({4, 2}, -1, 1, rng), true);
    VarD target_a = VarD::leaf(TensorD::uniform({4, 2}, -1, 1, rng), false);
    VarD pred_r = VarD::leaf(TensorD::uniform({4, 1}, -1, 1, rng), true);
    VarD target_r = VarD::leaf(TensorD::uniform({4, 1}, -1, 1, rng), false);
    auto single = [&] { return mse(pred_a, target_a); };
    check_loss("context(single mse)", single().item(), naive_mse(pred_a.value(), target_a.value()),
               {pred_a}, single);
    auto concatenated = [&] {
      return mse(concat_cols(pred_a, pred_r), concat_cols(target_a, target_r));
    };
    double se = 0.0;
    for (long i = 0; i < 8; ++i)
      se += (pred_a.value()[i] - target_a.value()[i]) * (pred_a.value()[i] - target_a.value()[i]);
    for (long i = 0; i < 4; ++i)
      se += (pred_r.value()[i] - target_r.value()[i]) * (pred_r.value()[i] - target_r.value()[i]);
    check_loss("context(concat mse)", concatenated().item(), se / 12.0, {pred_a, pred_r},
               concatenated);
    auto balanced = [&] {
      return ssl::balanced_combine(mse(pred_a, target_a), mse(pred_r, target_r));
    };
    const double naive_bal = 0.5 * (naive_mse(pred_a.value(), target_a.value()) +
                                    naive_mse(pred_r.value(), target_r.value()));
    check_loss("context(balanced)", balanced().item(), naive_bal, {pred_a, pred_r}, balanced);
  }
  {  // weighted combo is a plain weighted sum
    ssl::LossCombo combo;
    combo.set("curl", 0.7);
    combo.set("byol", 1.3);
    combo.set("dino", 0.0);
    std::map<std::string, double> vals{{"curl", 0.42}, {"byol", 1.7}, {"dino", 9.0}};
    const double got = ssl::combo_loss_value(combo, vals);
    g.require(rel_err(got, 0.7 * 0.42 + 1.3 * 1.7) < 1e-12, "combo weighted sum mismatch");
  }
  g.note("straight-line and finite-difference oracles over the full loss catalog");
  return g;
}

// ---------------------------------------------------------------------------
// criterion 3: trivial values, exact to 1e-9
// ---------------------------------------------------------------------------

Gate criterion3() {
  Gate g;
  auto near = [&](double got, double expect, const char* what) {
    g.require(std::abs(got - expect) <= 1e-9,
              std::string(what) + " (got " + std::to_string(got) + ")");
  };
  {
    VarD q = VarD::leaf(TensorD::zeros({2, 3}), false);
    VarD k = VarD::leaf(TensorD({2, 3}, {1, 0, 0, 0, 1, 0}), false);
    near(ssl::info_nce(q, k, 1.0).item(), std::log(2.0), "info_nce uniform != ln 2");
  }
  {
    VarD p = VarD::leaf(TensorD({1, 2}, {1, 0}), false);
    VarD zp = VarD::leaf(TensorD({1, 2}, {2, 0}), false);
    VarD za = VarD::leaf(TensorD({1, 2}, {-3, 0}), false);
    near(ssl::byol_loss(p, zp, p, zp).item(), 0.0, "byol parallel != 0");
    near(ssl::byol_loss(p, za, p, za).item(), 4.0, "byol anti-parallel != 4");
  }
  {
    VarD h = VarD::leaf(TensorD({1, 2}, {1, 0}), false);
    VarD z = VarD::leaf(TensorD({1, 2}, {5, 0}), false);
    near(ssl::simsiam_loss(h, h, z, z).item(), -1.0, "simsiam identical != -1");
  }
  {
    VarD logits = VarD::leaf(TensorD::zeros({3, 4}), false);
    near(cross_entropy_rows(logits, {0, 1, 2}).item(), std::log(4.0), "rotation uniform != ln 4");
  }
  near(ssl::balanced_combine(VarD::scalar(2.0), VarD::scalar(4.0)).item(), 3.0,
       "balanced_combine(2,4) != 3");
  {
    std::vector<double> xs = {1, 2, 3, 4, 5, 6, 7, 8};
    near(evalkit::iqm(xs), 4.5, "IQM([1..8]) != 4.5");
  }
  {
    evalkit::ReprDataset d;
    d.n = 3;
    d.repr_dim = 3;
    d.repr = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    d.next_repr = d.repr;
    near(evalkit::orthogonality(d), 1.0, "orthogonality of orthonormal set != 1");
    RandomStream rng(7);
    near(evalkit::dynamic_awareness(d, rng), 1.0, "dynamic awareness with next==repr != 1");
  }
  g.note("eight closed-form values, all within 1e-9");
  return g;
}

// ---------------------------------------------------------------------------
// criterion 4: stop-gradient / isolation contracts
// ---------------------------------------------------------------------------

train::TrainConfig tiny_train_config() {
  train::TrainConfig cfg;
  cfg.sac.encoder.conv_layers = 2;
  cfg.sac.encoder.filters = 4;
  cfg.sac.encoder.strides = {4, 2};
  cfg.sac.encoder.repr_dim = 16;
  cfg.sac.mlp_hidden = 32;
  cfg.ssl_head.proj_hidden = 16;
  cfg.ssl_head.proj_out = 8;
  cfg.ssl_head.mlp_hidden = 24;
  cfg.env.episode_len = 25;
  cfg.total_env_steps = 60;
  cfg.init_explore_steps = 20;
  cfg.batch_size = 8;
  cfg.buffer_capacity = 128;
  cfg.eval_every = 30;
  cfg.eval_episodes = 1;
  cfg.seed = 11;
  return cfg;
}

bool params_bitwise_equal(const NamedParams<float>& a, const NamedParams<float>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    const Tensor& ta = a[i].second.value();
    const Tensor& tb = b[i].second.value();
    if (ta.size() != tb.size()) return false;
    if (std::memcmp(ta.data(), tb.data(), sizeof(float) * static_cast<size_t>(ta.size())) != 0)
      return false;
  }
  return true;
}

Gate criterion4() {
  Gate g;
  // (a) actor step leaves the encoder bitwise unchanged
  {
    agent::SacConfig cfg = tiny_train_config().sac;
    cfg.actor_update_freq = 1;
    agent::SacAgent sac(cfg, 7);
    RandomStream rng(13);
    ImageBatch obs(8, 9, 84, 84);
    for (auto& px : obs.data) px = static_cast<uint8_t>(rng.randint(256));
    Tensor repr = sac.encode(to_float(obs), agent::WhichEncoder::online);
    std::vector<Tensor> before;
    for (auto& p : sac.encoder_params()) before.push_back(p.value());
    auto rep = sac.actor_alpha_update(repr, rng, 0);
    bool same = rep.did_actor_step;
    auto after = sac.encoder_params();
    for (size_t i = 0; i < after.size(); ++i)
      same = same && std::memcmp(before[i].data(), after[i].value().data(),
                                 sizeof(float) * static_cast<size_t>(before[i].size())) == 0;
    g.require(same, "(a) actor step changed encoder parameters");
  }
  // (b) an SSL optimizer step leaves every momentum/target parameter unchanged
  {
    train::TrainConfig cfg = tiny_train_config();
    cfg.losses.set("curl", 0.4);
    cfg.losses.set("byol", 0.3);
    cfg.losses.set("dino", 0.2);
    cfg.losses.set("predict_fr", 0.1);
    train::JointTrainer trainer(cfg);
    auto& sac = trainer.sac();
    auto targets = sac.target_params();
    std::vector<Tensor> before;
    for (auto& p : targets) before.push_back(p.value());

    auto environment = env::make_env(cfg.env);
    train::ReplayBuffer buffer(cfg.buffer_capacity, cfg.env, 2, 4);
    RandomStream rng(17);
    env::Observation obs = environment->reset(1);
    buffer.begin_episode(obs, environment->state());
    for (int i = 0; i < 30; ++i) {
      std::array<float, 2> a = {static_cast<float>(rng.uniform(-1, 1)),
                                static_cast<float>(rng.uniform(-1, 1))};
      auto sr = environment->step(a);
      buffer.add_step(a, sr.reward, sr.obs, sr.done, environment->state());
      if (sr.done) {
        obs = environment->reset(100 + static_cast<uint64_t>(i));
        buffer.begin_episode(obs, environment->state());
      }
    }
    train::SampledBatch batch = buffer.sample(8, rng);
    aug::BranchViews views =
        aug::make_branch_views(batch.s, batch.s_next, cfg.aug_online, cfg.aug_target, rng);
    ssl::SslContext ctx(sac, views, batch.actions, batch.rewards, rng);
    std::vector<Var> opt_params = sac.encoder_params();
    for (auto& p : trainer.ssl_module().head_params()) opt_params.push_back(p);
    Adam opt(opt_params, 1e-3f);
    Var total = trainer.ssl_module().compute_combo(ctx);
    opt.zero_grad();
    backward(total);
    opt.step();
    bool same = true;
    auto after = sac.target_params();
    for (size_t i = 0; i < after.size(); ++i)
      same = same && std::memcmp(before[i].data(), after[i].value().data(),
                                 sizeof(float) * static_cast<size_t>(before[i].size())) == 0;
    g.require(same, "(b) SSL step changed momentum/target parameters");
  }
  // (c) zero-weight combo is bitwise plain SAC + EMA
  {
    train::TrainConfig with_zero = tiny_train_config();
    with_zero.losses.set("curl", 0.0);
    with_zero.losses.set("byol", 0.0);
    train::TrainConfig plain = tiny_train_config();
    train::RunResult ra = train::train_run(with_zero);
    train::RunResult rb = train::train_run(plain);
    bool series_equal = ra.series.size() == rb.series.size();
    for (size_t i = 0; series_equal && i < ra.series.size(); ++i)
      series_equal = ra.series[i].mean_return == rb.series[i].mean_return;
    g.require(series_equal, "(c) zero-weight run diverged from plain SAC run");

    train::JointTrainer ta(with_zero), tb(plain);
    auto environment = env::make_env(plain.env);
    train::ReplayBuffer buffer(plain.buffer_capacity, plain.env, 2, 4);
    RandomStream rng(23);
    env::Observation obs = environment->reset(5);
    buffer.begin_episode(obs, environment->state());
    for (int i = 0; i < 30; ++i) {
      std::array<float, 2> a = {static_cast<float>(rng.uniform(-1, 1)),
                                static_cast<float>(rng.uniform(-1, 1))};
      auto sr = environment->step(a);
      buffer.add_step(a, sr.reward, sr.obs, sr.done, environment->state());
      if (sr.done) {
        obs = environment->reset(300 + static_cast<uint64_t>(i));
        buffer.begin_episode(obs, environment->state());
      }
    }
    RandomStream srng(29);
    for (int i = 0; i < 4; ++i) {
      train::SampledBatch batch = buffer.sample(8, srng);
      ta.update(batch);
      tb.update(batch);
    }
    g.require(params_bitwise_equal(ta.sac().named_params(), tb.sac().named_params()),
              "(c) parameters differ bitwise after zero-weight joint updates");
  }
  g.note("actor/encoder, SSL/momentum, and zero-weight equivalence contracts hold");
  return g;
}

// ---------------------------------------------------------------------------
// criterion 5: desk-scale learning + full-catalog stability
// ---------------------------------------------------------------------------

train::TrainConfig desk_learning_config(uint64_t seed) {
  train::TrainConfig cfg;
  cfg.sac.encoder.conv_layers = 2;
  cfg.sac.encoder.filters = 4;
  cfg.sac.encoder.strides = {4, 2};
  cfg.sac.encoder.repr_dim = 50;
  cfg.sac.mlp_hidden = 128;
  cfg.aug_online = {aug::AugKind::random_crop, 100, 84};
  cfg.aug_target = {aug::AugKind::random_crop, 100, 84};
  cfg.env.reward_mode = env::RewardMode::dense;
  cfg.total_env_steps = 30000;
  cfg.init_explore_steps = 1000;
  cfg.batch_size = 128;
  cfg.buffer_capacity = 30000;
  cfg.eval_every = 2000;
  cfg.eval_episodes = 10;
  cfg.seed = seed;
  return cfg;
}

Gate criterion5() {
  Gate g;
  // reference throughput: the 30-minute bound is stated for a laptop-class
  // core; scale it by this machine's measured per-update time against a
  // 45 ms/update laptop reference for the same configuration
  double ref_ms = 0.0;
  {
    train::TrainConfig probe = desk_learning_config(1);
    probe.total_env_steps = 140;
    probe.init_explore_steps = 100;
    probe.eval_every = 100000;
    auto t0 = Clock::now();
    train::train_run(probe);
    ref_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / 40.0;
  }
  const double budget_min = 30.0 * std::max(1.0, ref_ms / 45.0);

  int improved = 0;
  double worst_minutes = 0.0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    auto t0 = Clock::now();
    train::RunResult r = train::train_run(desk_learning_config(seed));
    const double minutes = minutes_since(t0);
    worst_minutes = std::max(worst_minutes, minutes);
    const bool ok = !r.failed && r.final_score > r.series.front().mean_return;
    improved += ok;
    std::printf("    seed %llu: first %.2f final %.2f %s (%.1f min, budget %.1f)\n",
                static_cast<unsigned long long>(seed), r.series.front().mean_return,
                r.final_score, ok ? "improved" : "NOT improved", minutes, budget_min);
    g.require(minutes <= budget_min, "seed exceeded the scaled 30-minute budget");
  }
  g.require(improved >= 4, "fewer than 4 of 5 seeds improved");
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "%d/5 seeds improved; slowest seed %.1f min against a %.1f min budget "
                "(machine at %.0f ms/update vs 45 ms laptop reference)",
                improved, worst_minutes, budget_min, ref_ms);
  g.note(buf);

  // every cataloged loss trains 5000 joint updates without NaN
  for (const auto& name : ssl::registered_loss_names()) {
    train::TrainConfig cfg = desk_learning_config(900);
    cfg.losses.set(name, 1.0);
    cfg.batch_size = 32;
    cfg.total_env_steps = 6000;
    cfg.init_explore_steps = 1000;
    cfg.eval_every = 100000;
    cfg.ssl_head.proj_hidden = 64;
    cfg.ssl_head.proj_out = 32;
    cfg.ssl_head.mlp_hidden = 64;
    auto t0 = Clock::now();
    train::RunResult r = train::train_run(cfg);
    std::printf("    loss %-22s %s (%.1f min)\n", name.c_str(),
                r.failed ? r.fail_reason.c_str() : "stable", minutes_since(t0));
    g.require(!r.failed, "loss '" + name + "' failed: " + r.fail_reason);
  }
  return g;
}

// ---------------------------------------------------------------------------
// criterion 6: PSO correctness on the synthetic sphere
// ---------------------------------------------------------------------------

Gate criterion6() {
  Gate g;
  std::vector<std::string> losses = {"curl", "byol", "predict_fr", "extract_ar", "ae",
                                     "rotation_cls"};
  evolve::SearchSpace space = evolve::SearchSpace::linear_space(losses);
  // sphere over box-normalized coordinates with an interior optimum
  evolve::RunFn sphere = [&space](const ssl::LossCombo& combo, uint64_t, const std::string&) {
    double acc = 0.0;
    for (const auto& name : space.loss_names) {
      const double w = combo.weight_of(name);
      acc += ((w - 5.0) / 10.0) * ((w - 5.0) / 10.0);
    }
    acc += ((combo.m1 - 100.0) / 32.0) * ((combo.m1 - 100.0) / 32.0);
    acc += ((combo.m2 - 100.0) / 32.0) * ((combo.m2 - 100.0) / 32.0);
    return evolve::RunOutcome{-acc, false};
  };
  evolve::SearchConfig cfg;
  cfg.space = space;
  cfg.objective.seeds = 3;
  cfg.init = evolve::InitStrategy::random_init;
  cfg.population = 20;
  cfg.generations = 50;
  cfg.seed = 2024;
  const std::string log_path = "/tmp/jointrl_acceptance_sphere.jsonl";
  evolve::SearchResult res = evolve::run_search(cfg, sphere, log_path);
  g.require(res.best_objective >= -1e-2,
            "sphere best " + std::to_string(res.best_objective) + " outside 1e-2");

  // non-decreasing global best across the log
  std::ifstream is(log_path);
  std::string line;
  double prev = -1e300;
  bool monotone = true;
  while (std::getline(is, line)) {
    const auto pos = line.find("\"global_best_objective\":");
    if (pos == std::string::npos) continue;
    const double v = std::stod(line.substr(pos + 24));
    monotone = monotone && v >= prev;
    prev = v;
  }
  g.require(monotone, "global-best series decreased");
  std::remove(log_path.c_str());

  // v2 seeding: exactly the 30 Cartesian-product particles
  evolve::SearchSpace log_sp = evolve::SearchSpace::log_space(losses);
  RandomStream rng(5);
  auto pop = evolve::init_population(log_sp, evolve::InitStrategy::v2, 50, rng);
  bool seeded_ok = pop.size() == 50;
  const double mags[] = {86, 88, 92, 100, 116};
  for (int mi = 0; mi < 5 && seeded_ok; ++mi)
    for (int k = 0; k < 6 && seeded_ok; ++k) {
      const auto& p = pop[static_cast<size_t>(mi * 6 + k)];
      for (int d = 0; d < 6; ++d)
        seeded_ok = seeded_ok && p.position[static_cast<size_t>(d)] == (d == k ? 0.0 : -4.0);
      seeded_ok = seeded_ok && p.position[6] == mags[mi] && p.position[7] == mags[mi];
    }
  g.require(seeded_ok, "v2 Cartesian-product seeding incorrect");
  char buf[128];
  std::snprintf(buf, sizeof buf, "sphere best %.2e, monotone log, 30 seeded particles",
                res.best_objective);
  g.note(buf);
  return g;
}

// ---------------------------------------------------------------------------
// criterion 7: representation-metric oracles + identity probe
// ---------------------------------------------------------------------------

Gate criterion7() {
  Gate g;
  // hand-built 3-4 point datasets, recomputed straight-line to 1e-12
  evalkit::ReprDataset d;
  d.n = 4;
  d.repr_dim = 2;
  d.repr = {0, 0, 1, 0, 0, 2, 3, 1};
  d.next_repr = {0.5, 0, 1, 0.5, 0, 2.5, 2.5, 1};
  d.values = {0.5, 1.0, -1.0, 2.0};

  {
    RandomStream a(31), b(31);
    const double got = evalkit::dynamic_awareness(d, a);
    double rand_sum = 0, temp_sum = 0;
    for (long i = 0; i < 4; ++i) {
      const long j = b.randint(4);
      double acc = 0;
      for (long k = 0; k < 2; ++k) {
        const double dd = d.repr[i * 2 + k] - d.repr[j * 2 + k];
        acc += dd * dd;
      }
      rand_sum += std::sqrt(acc);
      acc = 0;
      for (long k = 0; k < 2; ++k) {
        const double dd = d.repr[i * 2 + k] - d.next_repr[i * 2 + k];
        acc += dd * dd;
      }
      temp_sum += std::sqrt(acc);
    }
    g.require(std::abs(got - (rand_sum - temp_sum) / rand_sum) <= 1e-12,
              "dynamic awareness oracle mismatch");
  }
  {
    double max_ds = 0, max_dv = 0;
    auto dist = [&](long i, long j) {
      double acc = 0;
      for (long k = 0; k < 2; ++k) {
        const double dd = d.repr[i * 2 + k] - d.repr[j * 2 + k];
        acc += dd * dd;
      }
      return std::sqrt(acc);
    };
    for (long i = 0; i < 4; ++i)
      for (long j = 0; j < 4; ++j) {
        max_ds = std::max(max_ds, dist(i, j));
        max_dv = std::max(max_dv, std::abs(d.values[i] - d.values[j]));
      }
    double acc = 0;
    for (long i = 0; i < 4; ++i)
      for (long j = 0; j < 4; ++j)
        acc += std::min((std::abs(d.values[i] - d.values[j]) / max_dv) /
                            (dist(i, j) / max_ds + 1e-2),
                        1.0);
    g.require(std::abs(evalkit::diversity(d) - (1.0 - acc / 16.0)) <= 1e-12,
              "diversity oracle mismatch");
  }
  {
    double acc = 0;
    auto norm = [&](long i) {
      return std::sqrt(d.repr[i * 2] * d.repr[i * 2] + d.repr[i * 2 + 1] * d.repr[i * 2 + 1]);
    };
    evalkit::ReprDataset dd = d;
    dd.repr[0] = 0.3;  // avoid the zero-norm row for the cosine sum
    for (long i = 0; i < 4; ++i)
      for (long j = i + 1; j < 4; ++j) {
        const double dot = dd.repr[i * 2] * dd.repr[j * 2] + dd.repr[i * 2 + 1] * dd.repr[j * 2 + 1];
        const double ni = std::sqrt(dd.repr[i * 2] * dd.repr[i * 2] +
                                    dd.repr[i * 2 + 1] * dd.repr[i * 2 + 1]);
        const double nj = std::sqrt(dd.repr[j * 2] * dd.repr[j * 2] +
                                    dd.repr[j * 2 + 1] * dd.repr[j * 2 + 1]);
        acc += std::abs(dot) / (ni * nj);
      }
    (void)norm;
    g.require(std::abs(evalkit::orthogonality(dd) - (1.0 - acc / 6.0)) <= 1e-12,
              "orthogonality oracle mismatch");
  }
  {
    RandomStream rng(17);
    evalkit::ReprDataset train, test;
    auto fill = [&](evalkit::ReprDataset& ds, long n) {
      ds.n = n;
      ds.repr_dim = 3;
      ds.state_dim = 3;
      for (long i = 0; i < n * 3; ++i) {
        const double v = rng.uniform(-1, 1);
        ds.repr.push_back(v);
        ds.next_repr.push_back(v);
        ds.states.push_back(v);
      }
      ds.values.assign(static_cast<size_t>(n), 0.0);
    };
    fill(train, 256);
    fill(test, 64);
    evalkit::ProbeConfig pc;
    pc.hidden = 256;
    pc.epochs = 300;
    const double mse_v = evalkit::state_probe(train, test, pc);
    g.require(mse_v < 1e-3, "identity probe MSE " + std::to_string(mse_v) + " >= 1e-3");
    char buf[96];
    std::snprintf(buf, sizeof buf, "oracles within 1e-12; identity probe MSE %.2e", mse_v);
    g.note(buf);
  }
  return g;
}

// ---------------------------------------------------------------------------
// criterion 8: byte-identical regeneration
// ---------------------------------------------------------------------------

Gate criterion8() {
  Gate g;
  {  // train_run CSV
    train::TrainConfig cfg = tiny_train_config();
    cfg.losses.set("curl", 0.5);
    cfg.total_env_steps = 120;
    cfg.init_explore_steps = 40;
    cfg.eval_every = 40;
    std::string csv_a = train::results_csv_header();
    std::string csv_b = train::results_csv_header();
    train::RunResult ra = train::train_run(cfg);
    train::RunResult rb = train::train_run(cfg);
    train::append_results_csv(csv_a, cfg, ra);
    train::append_results_csv(csv_b, cfg, rb);
    g.require(csv_a == csv_b, "train_run CSV differs between reruns");

    // report regeneration from the same rows is byte-identical
    auto rows = cli::parse_results_csv(csv_a);
    auto rep1 = cli::build_report(rows);
    auto rep2 = cli::build_report(rows);
    g.require(rep1.files == rep2.files, "report files differ between regenerations");
  }
  {  // search generation log
    evolve::SearchSpace space = evolve::SearchSpace::linear_space({"curl", "byol"});
    evolve::RunFn fn = [](const ssl::LossCombo& combo, uint64_t seed, const std::string&) {
      return evolve::RunOutcome{-(combo.weight_of("curl") - 3.0) * (combo.weight_of("curl") - 3.0) +
                                    0.001 * static_cast<double>(seed),
                                false};
    };
    evolve::SearchConfig cfg;
    cfg.space = space;
    cfg.objective.seeds = 3;
    cfg.population = 6;
    cfg.generations = 3;
    const std::string log_a = "/tmp/jointrl_acc_det_a.jsonl";
    const std::string log_b = "/tmp/jointrl_acc_det_b.jsonl";
    evolve::run_search(cfg, fn, log_a);
    evolve::run_search(cfg, fn, log_b);
    auto slurp = [](const std::string& p) {
      std::ifstream is(p);
      std::stringstream ss;
      ss << is.rdbuf();
      return ss.str();
    };
    g.require(slurp(log_a) == slurp(log_b), "search logs differ between reruns");
    std::remove(log_a.c_str());
    std::remove(log_b.c_str());
  }
  g.note("run CSVs, search logs, and reports regenerate byte-identically");
  return g;
}

}  // namespace

int main(int argc, char** argv) {
  int which = 0;
  for (int i = 1; i + 1 < argc + 1; ++i) {
    if (i < argc && std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
      which = std::atoi(argv[i + 1]);
  }
  struct Entry {
    int id;
    const char* title;
    Gate (*fn)();
  };
  const Entry entries[] = {
      {1, "relative-score reproduction from published IQM columns", criterion1},
      {2, "loss-oracle suite (straight-line + finite differences)", criterion2},
      {3, "trivial-value suite", criterion3},
      {4, "stop-gradient and isolation contracts", criterion4},
      {5, "desk-scale learning and full-catalog stability", criterion5},
      {6, "PSO correctness on the synthetic sphere", criterion6},
      {7, "representation-metric oracles and identity probe", criterion7},
      {8, "byte-identical regeneration", criterion8},
  };
  bool all_ok = true;
  for (const auto& e : entries) {
    if (which != 0 && e.id != which) continue;
    Gate g;
    try {
      g = e.fn();
    } catch (const std::exception& ex) {
      g.ok = false;
      g.detail = std::string("exception: ") + ex.what();
    }
    std::printf("[%s] criterion %d: %s%s%s\n", g.ok ? "PASS" : "FAIL", e.id, e.title,
                g.detail.empty() ? "" : " -- ", g.detail.c_str());
    std::fflush(stdout);
    all_ok = all_ok && g.ok;
  }
  return all_ok ? 0 : 1;
}
