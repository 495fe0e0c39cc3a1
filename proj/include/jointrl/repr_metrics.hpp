#pragma once

#include <string>
#include <vector>

#include "jointrl/rng.hpp"

namespace jointrl::evalkit {

// Aligned encoder outputs for one checkpoint: row i of next_repr is the
// representation of the successor of row i; values hold the critic's value
// estimate for each row; states the ground-truth simulator state.
struct ReprDataset {
  long n = 0;
  long repr_dim = 0;
  long state_dim = 0;
  std::vector<double> repr;       // n x repr_dim
  std::vector<double> next_repr;  // n x repr_dim
  std::vector<double> values;     // n
  std::vector<double> states;     // n x state_dim

  const double* repr_row(long i) const { return repr.data() + i * repr_dim; }
  const double* next_row(long i) const { return next_repr.data() + i * repr_dim; }
  const double* state_row(long i) const { return states.data() + i * state_dim; }
  void validate() const;
};

// (sum_i ||phi_i - phi_rand|| - sum_i ||phi_i - phi_i'||) / sum_i ||phi_i - phi_rand||,
// with one random pairing drawn from rng.
double dynamic_awareness(const ReprDataset& data, RandomStream& rng);

// 1 - (1/N^2) sum_{i,j} min((dv_ij / max dv) / (ds_ij / max ds + 1e-2), 1);
// either normalization's 0/0 counts as 0.
double diversity(const ReprDataset& data);

// 1 - mean over unordered pairs of |cos(phi_i, phi_j)|.
double orthogonality(const ReprDataset& data);

struct ProbeConfig {
  long hidden = 1024;
  long epochs = 300;
  long batch_size = 256;
  float lr = 1e-3f;
  uint64_t seed = 1;
};

// Two-layer MLP regression from representations to ground-truth states,
// fit on train and scored (MSE) on test.
double state_probe(const ReprDataset& train, const ReprDataset& test,
                   const ProbeConfig& cfg = {});

// Test MSE of always predicting the train-set mean state (probe baseline).
double probe_mean_baseline(const ReprDataset& train, const ReprDataset& test);

struct RepresentationReport {
  long update_step = 0;
  double dyn_awareness = 0.0;
  double diversity = 0.0;
  double orthogonality = 0.0;
  double probe_mse = 0.0;
};

std::string representation_report_csv_header();
std::string representation_report_csv_row(const RepresentationReport& r);

}  // namespace jointrl::evalkit
