#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "jointrl/repr_metrics.hpp"
#include "jointrl/stats.hpp"

using namespace jointrl;
using namespace jointrl::evalkit;

namespace {

ReprDataset make_dataset(std::vector<std::vector<double>> phi,
                         std::vector<std::vector<double>> phi_next, std::vector<double> values,
                         std::vector<std::vector<double>> states = {}) {
  ReprDataset d;
  d.n = static_cast<long>(phi.size());
  d.repr_dim = static_cast<long>(phi[0].size());
  for (auto& row : phi) d.repr.insert(d.repr.end(), row.begin(), row.end());
  for (auto& row : phi_next) d.next_repr.insert(d.next_repr.end(), row.begin(), row.end());
  d.values = std::move(values);
  if (!states.empty()) {
    d.state_dim = static_cast<long>(states[0].size());
    for (auto& row : states) d.states.insert(d.states.end(), row.begin(), row.end());
  }
  return d;
}

}  // namespace

TEST_CASE("iqm: trimming rules") {
  std::vector<double> a = {1, 2, 3, 4, 5, 6, 7, 8};
  CHECK(iqm(a) == doctest::Approx(4.5).epsilon(1e-12));
  std::vector<double> b = {5, 5, 5};
  CHECK(iqm(b) == doctest::Approx(5.0).epsilon(1e-12));
  std::vector<double> c = {1, 2, 3, 4};
  CHECK(iqm(c) == doctest::Approx(2.5).epsilon(1e-12));
  // fractional trim: n=5 keeps 0.75 of the 2nd and 4th observations
  std::vector<double> d = {1, 2, 3, 4, 5};
  CHECK(iqm(d) == doctest::Approx((0.75 * 2 + 3 + 0.75 * 4) / 2.5).epsilon(1e-12));
  std::vector<double> empty;
  CHECK_THROWS_AS(iqm(empty), std::invalid_argument);
  // unsorted input is handled
  std::vector<double> e = {8, 1, 5, 4, 2, 7, 3, 6};
  CHECK(iqm(e) == doctest::Approx(4.5).epsilon(1e-12));
}

TEST_CASE("iqm: affine equivariance") {
  RandomStream rng(3);
  std::vector<double> xs;
  for (int i = 0; i < 11; ++i) xs.push_back(rng.uniform(-5, 5));
  const double base = iqm(xs);
  std::vector<double> shifted = xs, scaled = xs;
  for (auto& v : shifted) v += 2.5;
  for (auto& v : scaled) v *= 3.0;
  CHECK(iqm(shifted) == doctest::Approx(base + 2.5).epsilon(1e-12));
  CHECK(iqm(scaled) == doctest::Approx(3.0 * base).epsilon(1e-12));
}

TEST_CASE("relative_score: hand-computed two-agent example and centering") {
  ScoreTable t;
  t.set_scores("A", "env1", {1.0});
  t.set_scores("A", "env2", {1.0});
  t.set_scores("B", "env1", {3.0});
  t.set_scores("B", "env2", {3.0});
  auto rs = relative_score(t);
  // per env: mean 2, sample std sqrt(2); z-scores -1/sqrt(2) and +1/sqrt(2)
  CHECK(rs["A"] == doctest::Approx(-2.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(rs["B"] == doctest::Approx(2.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(rs["A"] + rs["B"] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("relative_score: sums to zero and is invariant to per-env affine maps") {
  RandomStream rng(5);
  ScoreTable t;
  for (const char* agent : {"a1", "a2", "a3", "a4"})
    for (const char* env : {"e1", "e2", "e3"}) {
      std::vector<double> scores;
      for (int s = 0; s < 5; ++s) scores.push_back(rng.uniform(0, 100));
      t.set_scores(agent, env, scores);
    }
  auto rs = relative_score(t);
  double total = 0.0;
  for (auto& [a, v] : rs) total += v;
  CHECK(total == doctest::Approx(0.0).epsilon(1e-9));

  // positive affine transform per env leaves the scores unchanged
  ScoreTable t2;
  const double scales[] = {2.0, 0.5, 7.0};
  const double shifts[] = {-3.0, 11.0, 0.25};
  int ei = 0;
  for (const char* env : {"e1", "e2", "e3"}) {
    for (const char* agent : {"a1", "a2", "a3", "a4"}) {
      std::vector<double> scores = t.scores(agent, env);
      for (auto& v : scores) v = scales[ei] * v + shifts[ei];
      t2.set_scores(agent, env, scores);
    }
    ++ei;
  }
  auto rs2 = relative_score(t2);
  for (auto& [a, v] : rs)
    CHECK(rs2[a] == doctest::Approx(v).epsilon(1e-9));
}

TEST_CASE("relative_score errors: zero spread names the env, incomplete table rejected") {
  ScoreTable t;
  t.set_scores("A", "envx", {1.0});
  t.set_scores("B", "envx", {1.0});
  try {
    relative_score(t);
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("envx") != std::string::npos);
  }

  ScoreTable solo;
  solo.set_scores("A", "e", {1.0});
  CHECK_THROWS_AS(relative_score(solo), std::invalid_argument);

  ScoreTable holes;
  holes.set_scores("A", "e1", {1.0});
  holes.set_scores("B", "e2", {2.0});
  CHECK_THROWS_AS(relative_score(holes), std::invalid_argument);
}

TEST_CASE("pearson: exact lines, symmetry, independence") {
  std::vector<double> x = {0, 1, 2, 3, 4};
  std::vector<double> y;
  for (double v : x) y.push_back(2 * v + 1);
  CHECK(pearson(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> yn;
  for (double v : x) yn.push_back(-v);
  CHECK(pearson(x, yn) == doctest::Approx(-1.0).epsilon(1e-12));

  RandomStream rng(7);
  std::vector<double> a, b;
  for (int i = 0; i < 10000; ++i) {
    a.push_back(rng.uniform(-1, 1));
    b.push_back(rng.uniform(-1, 1));
  }
  CHECK(std::abs(pearson(a, b)) < 0.05);

  std::vector<double> constant = {3, 3, 3};
  std::vector<double> other = {1, 2, 3};
  CHECK_THROWS_AS(pearson(constant, other), std::invalid_argument);
}

TEST_CASE("dynamic_awareness: endpoints and brute-force oracle") {
  // phi' == phi -> 1 (temporal term vanishes)
  auto same = make_dataset({{1, 0}, {0, 1}, {2, 2}}, {{1, 0}, {0, 1}, {2, 2}}, {0, 0, 0});
  RandomStream rng(11);
  CHECK(dynamic_awareness(same, rng) == doctest::Approx(1.0).epsilon(1e-12));

  // 3-point hand example recomputed independently with the same pairing
  auto data = make_dataset({{0, 0}, {3, 0}, {0, 4}}, {{1, 0}, {3, 1}, {1, 4}}, {0, 0, 0});
  RandomStream rng_a(13), rng_b(13);
  const double got = dynamic_awareness(data, rng_a);
  double rand_sum = 0.0, temp_sum = 0.0;
  for (long i = 0; i < 3; ++i) {
    const long j = rng_b.randint(3);
    double acc = 0.0;
    for (long k = 0; k < 2; ++k) {
      const double d = data.repr[i * 2 + k] - data.repr[j * 2 + k];
      acc += d * d;
    }
    rand_sum += std::sqrt(acc);
    acc = 0.0;
    for (long k = 0; k < 2; ++k) {
      const double d = data.repr[i * 2 + k] - data.next_repr[i * 2 + k];
      acc += d * d;
    }
    temp_sum += std::sqrt(acc);
  }
  CHECK(got == doctest::Approx((rand_sum - temp_sum) / rand_sum).epsilon(1e-12));
}

TEST_CASE("diversity: endpoints from the normalization rules") {
  // all values equal -> every term 0 under the 0/0 rule -> 1
  auto flat_values =
      make_dataset({{0, 0}, {1, 0}, {0, 1}, {1, 1}}, {{0, 0}, {1, 0}, {0, 1}, {1, 1}},
                   {2.0, 2.0, 2.0, 2.0});
  CHECK(diversity(flat_values) == doctest::Approx(1.0).epsilon(1e-12));

  // representation collapse with spread values -> off-diagonal terms hit 1
  auto collapsed = make_dataset({{1, 1}, {1, 1}, {1, 1}, {1, 1}}, {{1, 1}, {1, 1}, {1, 1}, {1, 1}},
                                {0.0, 1.0, 2.0, 3.0});
  // off-diagonal pairs all have dv_norm >= 1/3 > 0.01 -> min(.,1) = 1;
  // diagonal contributes 0: diversity = 1 - 12/16
  CHECK(diversity(collapsed) == doctest::Approx(1.0 - 12.0 / 16.0).epsilon(1e-12));

  // brute-force recomputation on a 4-point dataset
  auto data = make_dataset({{0, 0}, {1, 0}, {0, 2}, {3, 1}}, {{0, 0}, {1, 0}, {0, 2}, {3, 1}},
                           {0.5, 1.0, -1.0, 2.0});
  double max_ds = 0.0, max_dv = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 2; ++k) {
        const double d = data.repr[i * 2 + k] - data.repr[j * 2 + k];
        acc += d * d;
      }
      max_ds = std::max(max_ds, std::sqrt(acc));
      max_dv = std::max(max_dv, std::abs(data.values[i] - data.values[j]));
    }
  double acc_terms = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 2; ++k) {
        const double d = data.repr[i * 2 + k] - data.repr[j * 2 + k];
        acc += d * d;
      }
      const double ds = std::sqrt(acc) / max_ds;
      const double dv = std::abs(data.values[i] - data.values[j]) / max_dv;
      acc_terms += std::min(dv / (ds + 1e-2), 1.0);
    }
  CHECK(diversity(data) == doctest::Approx(1.0 - acc_terms / 16.0).epsilon(1e-12));
}

TEST_CASE("orthogonality: endpoints and the 60-degree and collapse cases") {
  auto ortho = make_dataset({{1, 0, 0}, {0, 2, 0}, {0, 0, 5}}, {{1, 0, 0}, {0, 2, 0}, {0, 0, 5}},
                            {0, 0, 0});
  CHECK(orthogonality(ortho) == doctest::Approx(1.0).epsilon(1e-12));

  auto identical = make_dataset({{1, 1}, {2, 2}, {3, 3}}, {{1, 1}, {2, 2}, {3, 3}}, {0, 0, 0});
  CHECK(orthogonality(identical) == doctest::Approx(0.0).epsilon(1e-12));

  // two unit vectors at 60 degrees: 1 - |cos 60| = 0.5
  auto sixty = make_dataset({{1, 0}, {0.5, std::sqrt(3.0) / 2.0}},
                            {{1, 0}, {0.5, std::sqrt(3.0) / 2.0}}, {0, 0});
  CHECK(orthogonality(sixty) == doctest::Approx(0.5).epsilon(1e-12));

  auto zero_row = make_dataset({{0, 0}, {1, 0}}, {{0, 0}, {1, 0}}, {0, 0});
  CHECK_THROWS_AS(orthogonality(zero_row), std::invalid_argument);
}

TEST_CASE("state_probe: identity task fits below 1e-3; noise stays near the baseline") {
  RandomStream rng(17);
  auto make_identity = [&](long n) {
    ReprDataset d;
    d.n = n;
    d.repr_dim = 3;
    d.state_dim = 3;
    for (long i = 0; i < n; ++i)
      for (long k = 0; k < 3; ++k) {
        const double v = rng.uniform(-1, 1);
        d.repr.push_back(v);
        d.next_repr.push_back(v);
        d.states.push_back(v);
      }
    d.values.assign(static_cast<size_t>(n), 0.0);
    return d;
  };
  ReprDataset train = make_identity(256);
  ReprDataset test = make_identity(64);
  ProbeConfig cfg;
  cfg.hidden = 256;
  cfg.epochs = 300;
  const double mse = state_probe(train, test, cfg);
  CHECK(mse < 1e-3);

  // representations independent of the state cannot beat the mean baseline
  ReprDataset noise_train = train, noise_test = test;
  RandomStream nrng(19);
  for (auto& v : noise_train.repr) v = nrng.uniform(-1, 1);
  for (auto& v : noise_test.repr) v = nrng.uniform(-1, 1);
  const double noise_mse = state_probe(noise_train, noise_test, cfg);
  const double baseline = probe_mean_baseline(noise_train, noise_test);
  CHECK(noise_mse >= 0.9 * baseline);
}

TEST_CASE("metrics are deterministic given the rng seed") {
  RandomStream rng(23);
  ReprDataset d;
  d.n = 16;
  d.repr_dim = 4;
  for (long i = 0; i < 16 * 4; ++i) {
    d.repr.push_back(rng.uniform(-1, 1));
    d.next_repr.push_back(rng.uniform(-1, 1));
  }
  d.values.assign(16, 0.0);
  for (long i = 0; i < 16; ++i) d.values[static_cast<size_t>(i)] = rng.uniform(-1, 1);
  RandomStream a(31), b(31);
  CHECK(dynamic_awareness(d, a) == dynamic_awareness(d, b));
  CHECK(diversity(d) == diversity(d));
  CHECK(orthogonality(d) == orthogonality(d));
}
