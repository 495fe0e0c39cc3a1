#include "jointrl/repr_metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "jointrl/optim.hpp"

namespace jointrl::evalkit {

namespace {

double row_distance(const double* a, const double* b, long d) {
  double acc = 0.0;
  for (long k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

}  // namespace

void ReprDataset::validate() const {
  if (n < 1 || repr_dim < 1) throw std::invalid_argument("repr dataset: empty");
  if (static_cast<long>(repr.size()) != n * repr_dim ||
      static_cast<long>(next_repr.size()) != n * repr_dim)
    throw std::invalid_argument("repr dataset: representation size mismatch");
  if (!values.empty() && static_cast<long>(values.size()) != n)
    throw std::invalid_argument("repr dataset: value count mismatch");
  if (!states.empty() && static_cast<long>(states.size()) != n * state_dim)
    throw std::invalid_argument("repr dataset: state size mismatch");
}

double dynamic_awareness(const ReprDataset& data, RandomStream& rng) {
  data.validate();
  if (data.n < 2) throw std::invalid_argument("dynamic_awareness: need at least two rows");
  double random_sum = 0.0, temporal_sum = 0.0;
  for (long i = 0; i < data.n; ++i) {
    const long j = rng.randint(data.n);
    random_sum += row_distance(data.repr_row(i), data.repr_row(j), data.repr_dim);
    temporal_sum += row_distance(data.repr_row(i), data.next_row(i), data.repr_dim);
  }
  if (!(random_sum > 0.0))
    throw std::invalid_argument("dynamic_awareness: random-pair distance sum is zero");
  return (random_sum - temporal_sum) / random_sum;
}

double diversity(const ReprDataset& data) {
  data.validate();
  if (data.n < 2) throw std::invalid_argument("diversity: need at least two rows");
  if (static_cast<long>(data.values.size()) != data.n)
    throw std::invalid_argument("diversity: values required");
  const long n = data.n;
  std::vector<double> ds(static_cast<size_t>(n) * n, 0.0);
  double max_ds = 0.0, max_dv = 0.0;
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      const double d = row_distance(data.repr_row(i), data.repr_row(j), data.repr_dim);
      ds[static_cast<size_t>(i) * n + j] = d;
      max_ds = std::max(max_ds, d);
      max_dv = std::max(max_dv, std::abs(data.values[static_cast<size_t>(i)] -
                                         data.values[static_cast<size_t>(j)]));
    }
  double acc = 0.0;
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      const double dv = std::abs(data.values[static_cast<size_t>(i)] -
                                 data.values[static_cast<size_t>(j)]);
      const double dv_norm = max_dv > 0.0 ? dv / max_dv : 0.0;  // 0/0 counts as 0
      const double d = ds[static_cast<size_t>(i) * n + j];
      const double ds_norm = max_ds > 0.0 ? d / max_ds : 0.0;
      acc += std::min(dv_norm / (ds_norm + 1e-2), 1.0);
    }
  return 1.0 - acc / (static_cast<double>(n) * n);
}

double orthogonality(const ReprDataset& data) {
  data.validate();
  if (data.n < 2) throw std::invalid_argument("orthogonality: need at least two rows");
  std::vector<double> norms(static_cast<size_t>(data.n));
  for (long i = 0; i < data.n; ++i) {
    double acc = 0.0;
    for (long k = 0; k < data.repr_dim; ++k) {
      const double v = data.repr_row(i)[k];
      acc += v * v;
    }
    norms[static_cast<size_t>(i)] = std::sqrt(acc);
    if (!(norms[static_cast<size_t>(i)] > 0.0))
      throw std::invalid_argument("orthogonality: zero-norm row");
  }
  double acc = 0.0;
  for (long i = 0; i < data.n; ++i)
    for (long j = i + 1; j < data.n; ++j) {
      double dot = 0.0;
      for (long k = 0; k < data.repr_dim; ++k) dot += data.repr_row(i)[k] * data.repr_row(j)[k];
      acc += std::abs(dot) / (norms[static_cast<size_t>(i)] * norms[static_cast<size_t>(j)]);
    }
  const double pairs = static_cast<double>(data.n) * (data.n - 1) / 2.0;
  return 1.0 - acc / pairs;
}

double state_probe(const ReprDataset& train, const ReprDataset& test, const ProbeConfig& cfg) {
  train.validate();
  test.validate();
  if (train.state_dim != test.state_dim || train.repr_dim != test.repr_dim)
    throw std::invalid_argument("state_probe: train/test dimension mismatch");
  if (train.states.empty() || test.states.empty())
    throw std::invalid_argument("state_probe: states required");

  RandomStream rng(mix_seed(cfg.seed, 0x9806e));
  MlpT<float> probe(train.repr_dim, {cfg.hidden}, train.state_dim, rng);
  NamedParams<float> named;
  probe.collect(named, "probe");
  AdamT<float> opt(strip_names(named), cfg.lr);

  const long n = train.n;
  const long bs = std::min(cfg.batch_size, n);
  for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (long start = 0; start < n; start += bs) {
      const long count = std::min(bs, n - start);
      Tensor x({count, train.repr_dim});
      Tensor y({count, train.state_dim});
      for (long i = 0; i < count; ++i) {
        for (long k = 0; k < train.repr_dim; ++k)
          x.at2(i, k) = static_cast<float>(train.repr_row(start + i)[k]);
        for (long k = 0; k < train.state_dim; ++k)
          y.at2(i, k) = static_cast<float>(train.state_row(start + i)[k]);
      }
      Var loss = mse(probe.forward(Var::constant(x)), Var::constant(y));
      opt.zero_grad();
      backward(loss);
      opt.step();
    }
  }

  NoGradGuard ng;
  Tensor x({test.n, test.repr_dim});
  for (long i = 0; i < test.n; ++i)
    for (long k = 0; k < test.repr_dim; ++k)
      x.at2(i, k) = static_cast<float>(test.repr_row(i)[k]);
  Tensor pred = probe.forward(Var::constant(x)).value();
  double se = 0.0;
  for (long i = 0; i < test.n; ++i)
    for (long k = 0; k < test.state_dim; ++k) {
      const double d = pred.at2(i, k) - test.state_row(i)[k];
      se += d * d;
    }
  return se / static_cast<double>(test.n * test.state_dim);
}

double probe_mean_baseline(const ReprDataset& train, const ReprDataset& test) {
  std::vector<double> mean_state(static_cast<size_t>(train.state_dim), 0.0);
  for (long i = 0; i < train.n; ++i)
    for (long k = 0; k < train.state_dim; ++k)
      mean_state[static_cast<size_t>(k)] += train.state_row(i)[k];
  for (auto& v : mean_state) v /= static_cast<double>(train.n);
  double se = 0.0;
  for (long i = 0; i < test.n; ++i)
    for (long k = 0; k < test.state_dim; ++k) {
      const double d = mean_state[static_cast<size_t>(k)] - test.state_row(i)[k];
      se += d * d;
    }
  return se / static_cast<double>(test.n * test.state_dim);
}

std::string representation_report_csv_header() {
  return "update_step,dyn_awareness,diversity,orthogonality,probe_mse\n";
}

std::string representation_report_csv_row(const RepresentationReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%ld,%.9f,%.9f,%.9f,%.9f\n", r.update_step, r.dyn_awareness,
                r.diversity, r.orthogonality, r.probe_mse);
  return buf;
}

}  // namespace jointrl::evalkit
