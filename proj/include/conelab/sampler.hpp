// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "conelab/ensemble.hpp"
#include "conelab/random_stream.hpp"
#include "conelab/transfer_operator.hpp"

namespace conelab {

enum class Observable { Coefficient, VectorNorm, MatrixNorm, Entry11, SpectralRadius };

const char* observable_name(Observable obs);
Observable parse_observable(const std::string& name);

struct SamplerOptions {
  bool matrix_observables = true;  // maintain the renormalized product for ||G_n||, G_n^{1,1}, rho(G_n)
  int renorm_interval = 32;
  size_t shard_size = 4096;  // paths per stream shard
  bool record_atoms = false;
};

struct PathObservables {
  int n = 0;
  int dim = 0;
  size_t count = 0;
  std::vector<double> f;
  std::vector<double> v;
  std::uint64_t seed = 0;
  bool has_matrix = false;
  std::vector<double> log_coeff;    // log <f, G_n v>
  std::vector<double> log_vecnorm;  // log ||G_n v||
  std::vector<double> log_matnorm;  // log ||G_n||
  std::vector<double> log_entry11;  // log G_n^{1,1}
  std::vector<double> log_specrad;  // log rho(G_n)
  std::vector<double> endpoint;     // G_n·v, count x dim
  std::vector<int> atoms;           // count x n when recorded

  const std::vector<double>& column(Observable obs) const;
};

// Paths of G_n = g_n...g_1 started at v (any nonzero vector in R^d_+).
PathObservables simulate_paths(const FiniteEnsemble& ens, std::span<const double> v, std::span<const double> f, int n,
                               size_t count, const RandomStream& stream, const SamplerOptions& opt = {});

enum class TiltMode { Norm, Coefficient };

struct TiltedBatch : PathObservables {
  double s = 0.0;
  TiltMode mode = TiltMode::Norm;
  std::vector<double> log_weight;         // realized log dmu/dQ along the path
  std::vector<double> log_weight_theory;  // kappa-based form of the same weight
  double ess_fraction = 1.0;
  std::vector<std::string> warnings;
};

// Paths under Q_s^v (norm mode) or Q_{s,f}^v (coefficient mode).
TiltedBatch tilted_simulate(const FiniteEnsemble& ens, const SpectralSolution& sol, TiltMode mode,
                            std::span<const double> f, std::span<const double> v, int n, size_t count,
                            const RandomStream& stream, const SamplerOptions& opt = {});

enum class Tail { Upper, Lower };

struct ISEstimate {
  double estimate = 0.0;
  double se = 0.0;
  double hit_fraction = 0.0;
  std::vector<std::string> warnings;
};

// sum_i W_i 1{X_i >= threshold} / count (upper) or with <= (lower).
ISEstimate is_probability(const TiltedBatch& batch, double threshold, Tail tail);
ISEstimate is_probability(const TiltedBatch& batch, double threshold, Tail tail, Observable obs);
// Weighted frequency of X in [lo, hi], optionally weighted by phi(G_n·v).
ISEstimate is_interval(const TiltedBatch& batch, double lo, double hi, Observable obs,
                       const std::function<double(std::span<const double>)>& phi = {});

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

struct DriftEstimates {
  int n = 0;
  Estimate b_v;
  Estimate d_f;
  Estimate b_fv;
  Estimate A_fv;
  Estimate B_fv;
  Estimate m3;
  double identity_residual = 0.0;  // B - (b - A + d)
  double identity_se = 0.0;
};

// Draws from the invariant law nu of the chain: one chain per shard, burn-in then thinning.
std::vector<double> sample_nu(const FiniteEnsemble& ens, size_t count, const RandomStream& stream, int burn_in = 100,
                              int thin = 10);

DriftEstimates estimate_drifts(const FiniteEnsemble& ens, std::span<const double> f, std::span<const double> v,
                               double lambda, int n_tail, size_t count, const RandomStream& stream);

struct DecayRow {
  int n;
  double t;
  double modulus;
};

// |mean exp(i t log||G_n v||)| over the (unweighted) paths of each batch.
std::vector<DecayRow> characteristic_decay_diagnostic(const std::vector<const PathObservables*>& batches,
                                                      std::span<const double> t_values);

// Columns n, log_coeff, log_vecnorm, log_matnorm, log_entry11, log_specrad, endpoint_1..d, log_weight.
void write_batch_csv(const PathObservables& batch, const std::vector<double>* log_weight, const std::string& path);

}  // namespace conelab
