// SPDX-License-Identifier: Apache-2.0
#include "conelab/sampler.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <fstream>

#include "conelab/errors.hpp"
#include "conelab/stats.hpp"

namespace conelab {

const char* observable_name(Observable obs) {
  switch (obs) {
    case Observable::Coefficient: return "coefficient";
    case Observable::VectorNorm: return "vecnorm";
    case Observable::MatrixNorm: return "matnorm";
    case Observable::Entry11: return "entry11";
    case Observable::SpectralRadius: return "specrad";
  }
  return "?";
}

Observable parse_observable(const std::string& name) {
  for (Observable o : {Observable::Coefficient, Observable::VectorNorm, Observable::MatrixNorm, Observable::Entry11,
                       Observable::SpectralRadius})
    if (name == observable_name(o)) return o;
  throw Error(ErrorCode::SchemaViolation, "unknown observable \"" + name + "\"");
}

const std::vector<double>& PathObservables::column(Observable obs) const {
  switch (obs) {
    case Observable::Coefficient: return log_coeff;
    case Observable::VectorNorm: return log_vecnorm;
    case Observable::MatrixNorm: return log_matnorm;
    case Observable::Entry11: return log_entry11;
    case Observable::SpectralRadius: return log_specrad;
  }
  return log_coeff;
}

namespace {

struct Context {
  const FiniteEnsemble* ens = nullptr;
  const SpectralSolution* sol = nullptr;  // null for untilted sampling
  TiltMode mode = TiltMode::Norm;
  double s = 0.0;
  std::vector<double> v_hat;
  double log_vnorm = 0.0;
  std::vector<double> f;
  int n = 0;
  SamplerOptions opt;
  std::vector<double> logp;
  PathObservables* out = nullptr;
  TiltedBatch* tout = nullptr;
};

double log_dot(std::span<const double> a, const double* b, int d) {
  double acc = 0.0;
  for (int i = 0; i < d; ++i) acc += a[static_cast<size_t>(i)] * b[i];
  return std::log(acc);
}

template <int D>
void run_range(const Context& c, RandomStream rs, size_t begin, size_t end) {
  const FiniteEnsemble& ens = *c.ens;
  const int d = D > 0 ? D : ens.dim;
  const auto du = static_cast<size_t>(d);
  const size_t na = ens.size();
  const bool tilted = c.sol != nullptr;
  const bool matrix = c.opt.matrix_observables;
  const int n = c.n;
  std::vector<const double*> g(na);
  for (size_t a = 0; a < na; ++a) g[a] = ens.atoms[a].entries().data();

  std::vector<double> u(du), y(na * du), nrm(na), w(na), P(du * du), T(du * du);
  for (size_t i = begin; i < end; ++i) {
    std::copy(c.v_hat.begin(), c.v_hat.end(), u.begin());
    double acc = 1.0, lacc = c.log_vnorm, logW = 0.0, logP = 0.0;
    if (matrix) {
      std::fill(P.begin(), P.end(), 0.0);
      for (int k = 0; k < d; ++k) P[static_cast<size_t>(k * d + k)] = 1.0;
    }
    for (int step = 0; step < n; ++step) {
      size_t a;
      if (!tilted) {
        a = ens.sample_index(rs);
        const double* ga = g[a];
        double sum = 0.0;
        for (int r = 0; r < d; ++r) {
          double t = 0.0;
          for (int k = 0; k < d; ++k) t += ga[r * d + k] * u[static_cast<size_t>(k)];
          y[static_cast<size_t>(r)] = t;
          sum += t;
        }
        for (int r = 0; r < d; ++r) u[static_cast<size_t>(r)] = y[static_cast<size_t>(r)] / sum;
        acc *= sum;
      } else {
        double Z = 0.0;
        const double lfu = c.mode == TiltMode::Coefficient ? log_dot(c.f, u.data(), d) : 0.0;
        for (size_t b = 0; b < na; ++b) {
          double* yb = y.data() + b * du;
          double sum = 0.0;
          for (int r = 0; r < d; ++r) {
            double t = 0.0;
            for (int k = 0; k < d; ++k) t += g[b][r * d + k] * u[static_cast<size_t>(k)];
            yb[r] = t;
            sum += t;
          }
          nrm[b] = sum;
          double wb;
          if (c.mode == TiltMode::Norm) {
            for (int r = 0; r < d; ++r) yb[r] /= sum;
            wb = ens.probs[b] * std::exp(c.s * std::log(sum)) * c.sol->r_state({yb, du});
          } else {
            const double lfy = log_dot(c.f, yb, d);
            for (int r = 0; r < d; ++r) yb[r] /= sum;
            const double lfub = log_dot(c.f, yb, d);
            wb = ens.probs[b] * std::exp(c.s * (lfy - lfu - lfub)) * c.sol->r_state({yb, du});
          }
          w[b] = wb;
          Z += wb;
        }
        const double x = rs.uniform() * Z;
        double cum = 0.0;
        a = na - 1;
        for (size_t b = 0; b < na; ++b) {
          cum += w[b];
          if (x < cum) {
            a = b;
            break;
          }
        }
        logW += c.logp[a] - std::log(w[a] / Z);
        std::copy(y.begin() + static_cast<std::ptrdiff_t>(a * du), y.begin() + static_cast<std::ptrdiff_t>((a + 1) * du),
                  u.begin());
        acc *= nrm[a];
      }
      if (acc > 1e150 || acc < 1e-150) {
        lacc += std::log(acc);
        acc = 1.0;
      }
      if (matrix) {
        const double* ga = g[a];
        for (int r = 0; r < d; ++r)
          for (int col = 0; col < d; ++col) {
            double t = 0.0;
            for (int k = 0; k < d; ++k) t += ga[r * d + k] * P[static_cast<size_t>(k * d + col)];
            T[static_cast<size_t>(r * d + col)] = t;
          }
        P.swap(T);
        if ((step + 1) % c.opt.renorm_interval == 0) {
          double sum = 0.0;
          for (double v : P) sum += v;
          for (double& v : P) v /= sum;
          logP += std::log(sum);
        }
      }
      if (c.opt.record_atoms) c.out->atoms[i * static_cast<size_t>(n) + static_cast<size_t>(step)] = static_cast<int>(a);
    }
    const double lvn = lacc + std::log(acc);
    PathObservables& o = *c.out;
    o.log_vecnorm[i] = lvn;
    o.log_coeff[i] = lvn + log_dot(c.f, u.data(), d);
    std::copy(u.begin(), u.end(), o.endpoint.begin() + static_cast<std::ptrdiff_t>(i * du));
    if (matrix) {
      double sum = 0.0;
      for (double v : P) sum += v;
      for (double& v : P) v /= sum;
      logP += std::log(sum);
      o.log_matnorm[i] = logP;
      o.log_entry11[i] = logP + std::log(P[0]);
      o.log_specrad[i] = logP + std::log(collatz_wielandt(P, d, 1e-12).rho);
    }
    if (tilted) {
      TiltedBatch& t = *c.tout;
      t.log_weight[i] = logW;
      const double log_kappa = std::log(c.sol->kappa);
      const double log_norm_hat = lvn - c.log_vnorm;  // log ||G_n v_hat||
      if (c.mode == TiltMode::Norm) {
        t.log_weight_theory[i] = n * log_kappa + std::log(c.sol->r(c.v_hat)) - std::log(c.sol->r_state(u)) -
                                 c.s * log_norm_hat;
      } else {
        const double lf0 = log_dot(c.f, c.v_hat.data(), d);
        const double lfn = log_dot(c.f, u.data(), d);
        const double log_rsf0 = std::log(c.sol->r(c.v_hat)) - c.s * lf0;
        const double log_rsfn = std::log(c.sol->r_state(u)) - c.s * lfn;
        const double log_coeff_ratio = log_norm_hat + lfn - lf0;
        t.log_weight_theory[i] = n * log_kappa + log_rsf0 - log_rsfn - c.s * log_coeff_ratio;
      }
    }
  }
}

void run_all(Context& c, const RandomStream& stream, size_t count) {
  const size_t shard = std::max<size_t>(1, c.opt.shard_size);
  const size_t shards = (count + shard - 1) / shard;
  parallel_for(shards, [&](size_t k) {
    const size_t b = k * shard, e = std::min(count, b + shard);
    const RandomStream rs = stream.split(k);
    switch (c.ens->dim) {
      case 2: run_range<2>(c, rs, b, e); break;
      case 3: run_range<3>(c, rs, b, e); break;
      default: run_range<0>(c, rs, b, e); break;
    }
  });
}

void prepare(Context& c, PathObservables& o, const FiniteEnsemble& ens, std::span<const double> v,
             std::span<const double> f, int n, size_t count, const RandomStream& stream, const SamplerOptions& opt) {
  if (static_cast<int>(v.size()) != ens.dim || static_cast<int>(f.size()) != ens.dim)
    throw Error(ErrorCode::DimensionMismatch, "f and v must match the ensemble dimension");
  if (n < 1 || count < 1) throw Error(ErrorCode::InvalidArgument, "need n >= 1 and count >= 1");
  if (opt.renorm_interval < 1 || opt.renorm_interval > 256)
    throw Error(ErrorCode::InvalidArgument, "renormalization interval must be in [1, 256] to avoid overflow");
  double fs = 0.0;
  for (double x : f) {
    if (!(x >= 0.0)) throw Error(ErrorCode::InvalidArgument, "f must be nonnegative");
    fs += x;
  }
  if (!(fs > 0.0)) throw Error(ErrorCode::InvalidArgument, "f must be nonzero");
  const double vn = l1_norm(v);
  for (double x : v)
    if (!(x >= 0.0)) throw Error(ErrorCode::InvalidArgument, "v must be nonnegative");
  if (!(vn > 0.0)) throw Error(ErrorCode::InvalidArgument, "v must be nonzero");
  c.ens = &ens;
  c.v_hat.assign(v.begin(), v.end());
  for (double& x : c.v_hat) x /= vn;
  c.log_vnorm = std::log(vn);
  c.f.assign(f.begin(), f.end());
  c.n = n;
  c.opt = opt;
  for (double p : ens.probs) c.logp.push_back(std::log(p));
  o.n = n;
  o.dim = ens.dim;
  o.count = count;
  o.f = c.f;
  o.v.assign(v.begin(), v.end());
  o.seed = stream.seed();
  o.has_matrix = opt.matrix_observables;
  o.log_coeff.assign(count, 0.0);
  o.log_vecnorm.assign(count, 0.0);
  o.endpoint.assign(count * static_cast<size_t>(ens.dim), 0.0);
  if (opt.matrix_observables) {
    o.log_matnorm.assign(count, 0.0);
    o.log_entry11.assign(count, 0.0);
    o.log_specrad.assign(count, 0.0);
  }
  if (opt.record_atoms) o.atoms.assign(count * static_cast<size_t>(n), 0);
  c.out = &o;
}

}  // namespace

PathObservables simulate_paths(const FiniteEnsemble& ens, std::span<const double> v, std::span<const double> f, int n,
                               size_t count, const RandomStream& stream, const SamplerOptions& opt) {
  PathObservables o;
  Context c;
  prepare(c, o, ens, v, f, n, count, stream, opt);
  run_all(c, stream, count);
  return o;
}

TiltedBatch tilted_simulate(const FiniteEnsemble& ens, const SpectralSolution& sol, TiltMode mode,
                            std::span<const double> f, std::span<const double> v, int n, size_t count,
                            const RandomStream& stream, const SamplerOptions& opt) {
  if (sol.ensemble->dim != ens.dim || sol.ensemble->size() != ens.size())
    throw Error(ErrorCode::DimensionMismatch, "spectral solution belongs to a different ensemble");
  if (sol.s < 0.0) {
    if (!check_conditions(ens).a1)
      throw Error(ErrorCode::ConditionViolation, "lower-tail tilts need full comparability of entries");
    if (mode == TiltMode::Coefficient)
      for (double x : f)
        if (!(x > 0.0)) throw Error(ErrorCode::InvalidArgument, "coefficient tilt with s < 0 needs f > 0");
  }
  TiltedBatch t;
  Context c;
  prepare(c, t, ens, v, f, n, count, stream, opt);
  c.sol = &sol;
  c.mode = mode;
  c.s = sol.s;
  c.tout = &t;
  t.s = sol.s;
  t.mode = mode;
  t.log_weight.assign(count, 0.0);
  t.log_weight_theory.assign(count, 0.0);
  run_all(c, stream, count);

  double mx = -INFINITY;
  for (double lw : t.log_weight) mx = std::max(mx, lw);
  double s1 = 0.0, s2 = 0.0;
  for (double lw : t.log_weight) {
    const double w = std::exp(lw - mx);
    s1 += w;
    s2 += w * w;
  }
  t.ess_fraction = s1 * s1 / s2 / static_cast<double>(count);
  if (t.ess_fraction < 0.01) t.warnings.push_back("weight-degeneracy: effective sample size below 1%");
  return t;
}

namespace {

ISEstimate weighted_indicator(const TiltedBatch& batch, const std::function<double(size_t)>& h) {
  ISEstimate r;
  const auto n = static_cast<double>(batch.count);
  double s1 = 0.0, s2 = 0.0, hits = 0.0;
  for (size_t i = 0; i < batch.count; ++i) {
    const double hv = h(i);
    if (hv == 0.0) continue;
    hits += 1.0;
    const double x = std::exp(batch.log_weight[i]) * hv;
    s1 += x;
    s2 += x * x;
  }
  r.estimate = s1 / n;
  r.se = batch.count > 1 ? std::sqrt(std::max(0.0, (s2 / n - r.estimate * r.estimate) / (n - 1.0))) : 0.0;
  r.hit_fraction = hits / n;
  if (r.hit_fraction < 0.05 || r.hit_fraction > 0.95)
    r.warnings.push_back("wrong-tilt: event fires on " + std::to_string(100.0 * r.hit_fraction) + "% of tilted paths");
  return r;
}

}  // namespace

ISEstimate is_probability(const TiltedBatch& batch, double threshold, Tail tail, Observable obs) {
  const auto& x = batch.column(obs);
  if (x.empty()) throw Error(ErrorCode::InvalidArgument, std::string("batch has no ") + observable_name(obs) + " column");
  return weighted_indicator(batch, [&](size_t i) {
    return (tail == Tail::Upper ? x[i] >= threshold : x[i] <= threshold) ? 1.0 : 0.0;
  });
}

ISEstimate is_probability(const TiltedBatch& batch, double threshold, Tail tail) {
  return is_probability(batch, threshold, tail,
                        batch.mode == TiltMode::Coefficient ? Observable::Coefficient : Observable::VectorNorm);
}

ISEstimate is_interval(const TiltedBatch& batch, double lo, double hi, Observable obs,
                       const std::function<double(std::span<const double>)>& phi) {
  const auto& x = batch.column(obs);
  const auto d = static_cast<size_t>(batch.dim);
  ISEstimate r = weighted_indicator(batch, [&](size_t i) {
    if (x[i] < lo || x[i] > hi) return 0.0;
    return phi ? phi({batch.endpoint.data() + i * d, d}) : 1.0;
  });
  r.warnings.clear();
  return r;
}

std::vector<double> sample_nu(const FiniteEnsemble& ens, size_t count, const RandomStream& stream, int burn_in,
                              int thin) {
  const auto d = static_cast<size_t>(ens.dim);
  std::vector<double> out(count * d);
  const size_t shard = 4096;
  const size_t shards = (count + shard - 1) / shard;
  parallel_for(shards, [&](size_t k) {
    RandomStream rs = stream.split(k);
    std::vector<double> u(d, 1.0 / static_cast<double>(d)), y(d);
    auto step = [&] {
      ens.sample_matrix(rs).apply(u, y);
      const double s = l1_norm(y);
      for (size_t j = 0; j < d; ++j) u[j] = y[j] / s;
    };
    for (int i = 0; i < burn_in; ++i) step();
    for (size_t i = k * shard; i < std::min(count, (k + 1) * shard); ++i) {
      for (int j = 0; j < thin; ++j) step();
      std::copy(u.begin(), u.end(), out.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
  });
  return out;
}

DriftEstimates estimate_drifts(const FiniteEnsemble& ens, std::span<const double> f, std::span<const double> v,
                               double lambda, int n_tail, size_t count, const RandomStream& stream) {
  const auto d = static_cast<size_t>(ens.dim);
  const std::vector<double> ones(d, 1.0);
  SamplerOptions opt;
  opt.matrix_observables = false;
  DriftEstimates r;
  r.n = n_tail;
  const double nl = n_tail * lambda;

  {
    const auto p = simulate_paths(ens, v, ones, n_tail, count, stream.split(1), opt);
    std::vector<double> x(count);
    for (size_t i = 0; i < count; ++i) x[i] = p.log_vecnorm[i] - nl;
    const MeanSE m = mean_se(x);
    r.b_v = {m.mean, m.se};
  }
  {
    const auto nu = sample_nu(ens, count, stream.split(2));
    std::vector<double> x(count);
    for (size_t i = 0; i < count; ++i) x[i] = std::log(dot(f, {nu.data() + i * d, d}));
    const MeanSE m = mean_se(x);
    r.d_f = {m.mean, m.se};
  }
  const double log_fv = std::log(dot(f, v));
  {
    const auto p = simulate_paths(ens, v, f, n_tail, count, stream.split(3), opt);
    std::vector<double> x(count);
    for (size_t i = 0; i < count; ++i) x[i] = p.log_coeff[i] - log_fv - nl;
    const MeanSE m = mean_se(x);
    r.b_fv = {m.mean, m.se};
  }
  {
    double a = 0.0;
    std::vector<double> y(d);
    for (size_t k = 0; k < ens.size(); ++k) {
      ens.atoms[k].apply(v, y);
      a += ens.probs[k] * (std::log(dot(f, y)) - lambda);
    }
    r.A_fv = {a, 0.0};
  }
  {
    double val = 0.0, var = 0.0;
    std::vector<double> y(d);
    for (size_t k = 0; k < ens.size(); ++k) {
      ens.atoms[k].apply(v, y);
      const double s = l1_norm(y);
      for (double& t : y) t /= s;
      const double log_fu = std::log(dot(f, y));
      const auto p = simulate_paths(ens, y, f, n_tail, count, stream.split(10 + k), opt);
      std::vector<double> x(count);
      for (size_t i = 0; i < count; ++i) x[i] = p.log_coeff[i] - log_fu - nl;
      const MeanSE m = mean_se(x);
      val += ens.probs[k] * m.mean;
      var += ens.probs[k] * ens.probs[k] * m.se * m.se;
    }
    r.B_fv = {val, std::sqrt(var)};
  }
  {
    // third moment of the norm cocycle started from nu
    const auto nu = sample_nu(ens, count, stream.split(4));
    std::vector<double> x(count);
    const size_t block = 4096;
    const size_t blocks = (count + block - 1) / block;
    parallel_for(blocks, [&](size_t k) {
      RandomStream rs = stream.split(5).split(k);
      std::vector<double> u(d), y(d);
      for (size_t i = k * block; i < std::min(count, (k + 1) * block); ++i) {
        std::copy(nu.begin() + static_cast<std::ptrdiff_t>(i * d), nu.begin() + static_cast<std::ptrdiff_t>((i + 1) * d),
                  u.begin());
        double acc = 0.0;
        for (int j = 0; j < n_tail; ++j) {
          ens.sample_matrix(rs).apply(u, y);
          const double s = l1_norm(y);
          acc += std::log(s);
          for (size_t t = 0; t < d; ++t) u[t] = y[t] / s;
        }
        const double c = acc - nl;
        x[i] = c * c * c / n_tail;
      }
    });
    const MeanSE m = mean_se(x);
    r.m3 = {m.mean, m.se};
  }
  r.identity_residual = r.B_fv.value - (r.b_v.value - r.A_fv.value + r.d_f.value);
  r.identity_se = std::sqrt(r.B_fv.se * r.B_fv.se + r.b_v.se * r.b_v.se + r.d_f.se * r.d_f.se);
  return r;
}

std::vector<DecayRow> characteristic_decay_diagnostic(const std::vector<const PathObservables*>& batches,
                                                      std::span<const double> t_values) {
  std::vector<DecayRow> rows;
  for (const auto* b : batches)
    for (double t : t_values) {
      std::complex<double> acc(0.0, 0.0);
      for (double x : b->log_vecnorm) acc += std::polar(1.0, t * x);
      rows.push_back({b->n, t, std::abs(acc) / static_cast<double>(b->count)});
    }
  return rows;
}

void write_batch_csv(const PathObservables& batch, const std::vector<double>* log_weight, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out.precision(17);
  out << "n,log_coeff,log_vecnorm,log_matnorm,log_entry11,log_specrad";
  for (int k = 0; k < batch.dim; ++k) out << ",endpoint_" << (k + 1);
  out << ",log_weight\n";
  const auto d = static_cast<size_t>(batch.dim);
  auto cell = [&](const std::vector<double>& col, size_t i) -> std::string {
    if (col.empty()) return "";
    std::ostringstream s;
    s.precision(17);
    s << col[i];
    return s.str();
  };
  for (size_t i = 0; i < batch.count; ++i) {
    out << batch.n << "," << batch.log_coeff[i] << "," << batch.log_vecnorm[i] << "," << cell(batch.log_matnorm, i)
        << "," << cell(batch.log_entry11, i) << "," << cell(batch.log_specrad, i);
    for (size_t k = 0; k < d; ++k) out << "," << batch.endpoint[i * d + k];
    out << "," << (log_weight ? (*log_weight)[i] : 0.0) << "\n";
  }
}

}  // namespace conelab
