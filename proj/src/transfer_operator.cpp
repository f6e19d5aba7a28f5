// SPDX-License-Identifier: Apache-2.0
#include "conelab/transfer_operator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "conelab/errors.hpp"

namespace conelab {

const char* grid_kind_name(GridKind kind) { return kind == GridKind::Linear ? "linear" : "chebyshev"; }

GridKind parse_grid_kind(const std::string& name) {
  if (name == "linear") return GridKind::Linear;
  if (name == "chebyshev") return GridKind::Chebyshev;
  throw Error(ErrorCode::SchemaViolation, "grid: expected \"linear\" or \"chebyshev\", got \"" + name + "\"");
}

namespace {

// Node index of lattice point (i, j) in the d = 3 grid of the given resolution.
int lattice_index(int r, int i, int j) { return i * (r + 1) - i * (i - 1) / 2 + j; }

double first_coordinate(std::span<const double> p) {
  const double s = p[0] + p[1];
  return p[0] / s;
}

}  // namespace

void SimplexGrid::stencil(std::span<const double> point, std::vector<StencilEntry>& out) const {
  out.clear();
  if (static_cast<int>(point.size()) != dim) throw Error(ErrorCode::DimensionMismatch, "stencil point dimension");
  if (dim == 2) {
    const double x = first_coordinate(point);
    if (kind == GridKind::Linear) {
      const double u = std::clamp(x, 0.0, 1.0) * resolution;
      const int i0 = std::min(static_cast<int>(std::floor(u)), resolution - 1);
      const double f = u - i0;
      out.push_back({i0, 1.0 - f});
      out.push_back({i0 + 1, f});
      return;
    }
    const size_t n = t.size();
    double denom = 0.0;
    for (size_t k = 0; k < n; ++k) {
      const double diff = x - t[k];
      if (diff == 0.0) {
        out.clear();
        out.push_back({static_cast<int>(k), 1.0});
        return;
      }
      const double c = bary[k] / diff;
      out.push_back({static_cast<int>(k), c});
      denom += c;
    }
    for (auto& e : out) e.weight /= denom;
    return;
  }
  // d = 3 barycentric lattice
  const double s = point[0] + point[1] + point[2];
  const int r = resolution;
  const double x = point[0] / s * r, y = point[1] / s * r;
  int i0 = std::clamp(static_cast<int>(std::floor(x)), 0, r - 1);
  int j0 = std::clamp(static_cast<int>(std::floor(y)), 0, r - 1);
  if (i0 + j0 > r - 1) {
    if (j0 > 0) --j0; else --i0;
  }
  const double fx = x - i0, fy = y - j0;
  if (fx + fy <= 1.0 + 1e-14) {
    out.push_back({lattice_index(r, i0, j0), 1.0 - fx - fy});
    out.push_back({lattice_index(r, i0 + 1, j0), fx});
    out.push_back({lattice_index(r, i0, j0 + 1), fy});
  } else {
    out.push_back({lattice_index(r, i0 + 1, j0 + 1), fx + fy - 1.0});
    out.push_back({lattice_index(r, i0, j0 + 1), 1.0 - fx});
    out.push_back({lattice_index(r, i0 + 1, j0), 1.0 - fy});
  }
}

double SimplexGrid::interpolate(std::span<const double> values, std::span<const double> point) const {
  std::vector<StencilEntry> st;
  stencil(point, st);
  double acc = 0.0;
  for (const auto& e : st) acc += e.weight * values[static_cast<size_t>(e.node)];
  return acc;
}

SimplexGrid build_grid(int d, int resolution) {
  if (d != 2 && d != 3) throw Error(ErrorCode::UnsupportedDimension, "grids support d = 2 or 3, got " + std::to_string(d));
  if (resolution < 1) throw Error(ErrorCode::InvalidArgument, "grid resolution must be positive");
  SimplexGrid g;
  g.dim = d;
  g.resolution = resolution;
  g.kind = GridKind::Linear;
  const double h = 1.0 / resolution;
  if (d == 2) {
    for (int k = 0; k <= resolution; ++k) {
      const double tk = k * h;
      g.t.push_back(tk);
      g.coords.push_back(tk);
      g.coords.push_back(1.0 - tk);
      g.weights.push_back((k == 0 || k == resolution) ? 0.5 * h : h);
    }
    return g;
  }
  const int r = resolution;
  for (int i = 0; i <= r; ++i)
    for (int j = 0; j <= r - i; ++j) {
      g.coords.push_back(i * h);
      g.coords.push_back(j * h);
      g.coords.push_back((r - i - j) * h);
    }
  g.weights.assign(g.size(), 0.0);
  const double third = h * h / 6.0;  // area of one small triangle / 3
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r - i; ++j) {
      for (int idx : {lattice_index(r, i, j), lattice_index(r, i + 1, j), lattice_index(r, i, j + 1)})
        g.weights[static_cast<size_t>(idx)] += third;
      if (i + j <= r - 2)
        for (int idx : {lattice_index(r, i + 1, j + 1), lattice_index(r, i + 1, j), lattice_index(r, i, j + 1)})
          g.weights[static_cast<size_t>(idx)] += third;
    }
  return g;
}

SimplexGrid build_chebyshev_grid(int resolution, double t_lo, double t_hi) {
  if (resolution < 2) throw Error(ErrorCode::InvalidArgument, "Chebyshev grid needs resolution >= 2");
  if (!(t_lo < t_hi) || t_lo < 0.0 || t_hi > 1.0) throw Error(ErrorCode::InvalidArgument, "bad Chebyshev interval");
  const int N = resolution;
  SimplexGrid g;
  g.dim = 2;
  g.resolution = N;
  g.kind = GridKind::Chebyshev;
  g.t_lo = t_lo;
  g.t_hi = t_hi;
  const double pi = std::numbers::pi;
  for (int k = 0; k <= N; ++k) {
    // symmetric form of -cos(k pi / N), exact at the ends and the midpoint
    const double u = 0.5 + 0.5 * std::sin(pi * (2.0 * k - N) / (2.0 * N));
    const double tk = (k == 0) ? t_lo : (k == N) ? t_hi : t_lo + (t_hi - t_lo) * u;
    g.t.push_back(tk);
    g.coords.push_back(tk);
    g.coords.push_back(1.0 - tk);
    g.bary.push_back(((k % 2) ? -1.0 : 1.0) * ((k == 0 || k == N) ? 0.5 : 1.0));
  }
  // Clenshaw-Curtis weights
  std::vector<double> w(static_cast<size_t>(N + 1), 0.0);
  for (int k = 0; k <= N; ++k) {
    const double th = pi * k / N;
    if (k == 0 || k == N) {
      w[static_cast<size_t>(k)] = (N % 2 == 0) ? 1.0 / (N * N - 1.0) : 1.0 / (static_cast<double>(N) * N);
      continue;
    }
    double v = 1.0;
    if (N % 2 == 0) {
      for (int j = 1; j < N / 2; ++j) v -= 2.0 * std::cos(2.0 * j * th) / (4.0 * j * j - 1.0);
      v -= std::cos(N * th) / (N * N - 1.0);
    } else {
      for (int j = 1; j <= (N - 1) / 2; ++j) v -= 2.0 * std::cos(2.0 * j * th) / (4.0 * j * j - 1.0);
    }
    w[static_cast<size_t>(k)] = 2.0 * v / N;
  }
  for (double& x : w) x *= 0.5 * (t_hi - t_lo);
  g.weights = std::move(w);
  return g;
}

std::pair<double, double> invariant_interval(const FiniteEnsemble& ens) {
  if (ens.dim != 2) throw Error(ErrorCode::UnsupportedDimension, "invariant interval is defined for d = 2");
  double lo = 1.0, hi = 0.0;
  for (const auto& g : ens.atoms) {
    for (int j = 0; j < 2; ++j) {
      const double col = g(0, j) / (g(0, j) + g(1, j));
      const double row = g(j, 0) / (g(j, 0) + g(j, 1));
      lo = std::min({lo, col, row});
      hi = std::max({hi, col, row});
    }
  }
  if (hi - lo < 1e-3) {
    lo -= 1e-2;
    hi += 1e-2;
  }
  return {std::max(lo, 0.0), std::min(hi, 1.0)};
}

SimplexGrid build_adapted_grid(const FiniteEnsemble& ens, int resolution, GridKind kind) {
  if (ens.dim == 2 && kind == GridKind::Chebyshev) {
    const auto [lo, hi] = invariant_interval(ens);
    return build_chebyshev_grid(resolution, lo, hi);
  }
  return build_grid(ens.dim, resolution);
}

namespace {

struct SparseKernel {
  std::vector<size_t> start;
  std::vector<int> col;
  std::vector<double> val;
  size_t rows() const { return start.size() - 1; }
};

// K_ij = sum_g p_g ||h x_i||^s L_j(h·x_i) with h = g or g^T.
SparseKernel build_kernel(const FiniteEnsemble& ens, double s, const SimplexGrid& grid, bool transpose) {
  const size_t n = grid.size();
  const auto d = static_cast<size_t>(grid.dim);
  SparseKernel K;
  K.start.push_back(0);
  std::vector<double> dense(n, 0.0);
  std::vector<char> touched(n, 0);
  std::vector<int> cols;
  std::vector<double> y(d);
  std::vector<StencilEntry> st;
  for (size_t i = 0; i < n; ++i) {
    cols.clear();
    for (size_t a = 0; a < ens.size(); ++a) {
      if (transpose) ens.atoms[a].apply_transpose(grid.node(i), y);
      else ens.atoms[a].apply(grid.node(i), y);
      const double nrm = l1_norm(y);
      const double w = ens.probs[a] * (s == 0.0 ? 1.0 : std::exp(s * std::log(nrm)));
      for (double& v : y) v /= nrm;
      grid.stencil(y, st);
      for (const auto& e : st) {
        if (e.weight == 0.0) continue;
        const auto j = static_cast<size_t>(e.node);
        if (!touched[j]) {
          touched[j] = 1;
          cols.push_back(e.node);
        }
        dense[j] += w * e.weight;
      }
    }
    std::sort(cols.begin(), cols.end());
    for (int j : cols) {
      K.col.push_back(j);
      K.val.push_back(dense[static_cast<size_t>(j)]);
      dense[static_cast<size_t>(j)] = 0.0;
      touched[static_cast<size_t>(j)] = 0;
    }
    K.start.push_back(K.col.size());
  }
  return K;
}

struct LeftEigen {
  std::vector<double> w;
  double kappa;
  int iterations;
};

// w K = kappa w with sum(w) = 1.
LeftEigen left_power(const SparseKernel& K, const SolveOptions& opt) {
  const size_t n = K.rows();
  std::vector<double> w(n, 1.0 / static_cast<double>(n)), y(n);
  double kprev = 0.0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    std::fill(y.begin(), y.end(), 0.0);
    for (size_t i = 0; i < n; ++i) {
      const double wi = w[i];
      if (wi == 0.0) continue;
      for (size_t e = K.start[i]; e < K.start[i + 1]; ++e) y[static_cast<size_t>(K.col[e])] += wi * K.val[e];
    }
    double k = 0.0;
    for (double v : y) k += v;
    if (!(k > 0.0) || !std::isfinite(k))
      throw Error(ErrorCode::NegativeWeight, "eigenmeasure iteration lost positivity");
    double diff = 0.0, wmax = 0.0;
    for (size_t i = 0; i < n; ++i) {
      y[i] /= k;
      diff = std::max(diff, std::abs(y[i] - w[i]));
      wmax = std::max(wmax, std::abs(y[i]));
    }
    w.swap(y);
    if (std::abs(k - kprev) <= opt.tol * k && diff <= opt.tol * wmax) return {w, k, it};
    kprev = k;
  }
  throw Error(ErrorCode::NoConvergence,
              "power iteration did not converge in " + std::to_string(opt.max_iter) + " iterations");
}

double integral_formula(std::span<const double> x, double s, const SimplexGrid& grid, const std::vector<double>& w) {
  if (s == 0.0) {
    double t = 0.0;
    for (double v : w) t += v;
    return t;
  }
  double acc = 0.0;
  for (size_t j = 0; j < w.size(); ++j) {
    if (w[j] == 0.0) continue;
    const double ip = dot(x, grid.node(j));
    if (ip <= 0.0) {
      if (s < 0.0) return INFINITY;
      continue;
    }
    acc += w[j] * std::exp(s * std::log(ip));
  }
  return acc;
}

std::vector<double> chebyshev_coefficients(const std::vector<double>& ascending_values) {
  const int N = static_cast<int>(ascending_values.size()) - 1;
  const double pi = std::numbers::pi;
  std::vector<double> c(static_cast<size_t>(N + 1), 0.0);
  for (int j = 0; j <= N; ++j) {
    double acc = 0.0;
    for (int m = 0; m <= N; ++m) {
      // value at x = cos(m pi / N) sits at ascending index N - m
      const double y = ascending_values[static_cast<size_t>(N - m)];
      const double f = (m == 0 || m == N) ? 0.5 : 1.0;
      acc += f * y * std::cos(pi * j * m / N);
    }
    c[static_cast<size_t>(j)] = 2.0 * acc / N;
  }
  c[0] *= 0.5;
  c[static_cast<size_t>(N)] *= 0.5;
  // drop the rounding-noise tail; sampler weights use realized normalizers, so this costs no bias
  double top = 0.0;
  for (double v : c) top = std::max(top, std::abs(v));
  size_t keep = c.size();
  while (keep > 1 && std::abs(c[keep - 1]) <= 1e-14 * top) --keep;
  c.resize(keep);
  return c;
}

double clenshaw(const std::vector<double>& c, double x) {
  double b1 = 0.0, b2 = 0.0;
  for (size_t k = c.size(); k-- > 1;) {
    const double b0 = c[k] + 2.0 * x * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  return c[0] + x * b1 - b2;
}

}  // namespace

std::vector<double> apply_Ps(const FiniteEnsemble& ens, double s, const SimplexGrid& grid,
                             std::span<const double> phi) {
  if (grid.dim != ens.dim) throw Error(ErrorCode::DimensionMismatch, "grid and ensemble dimensions differ");
  const SparseKernel K = build_kernel(ens, s, grid, false);
  std::vector<double> out(grid.size(), 0.0);
  for (size_t i = 0; i < grid.size(); ++i)
    for (size_t e = K.start[i]; e < K.start[i + 1]; ++e) out[i] += K.val[e] * phi[static_cast<size_t>(K.col[e])];
  return out;
}

double SpectralSolution::r(std::span<const double> x) const { return integral_formula(x, s, *grid, nu_s_star); }

double SpectralSolution::r_star(std::span<const double> x) const { return integral_formula(x, s, *grid, nu_s); }

double SpectralSolution::r_state(std::span<const double> v) const {
  if (s == 0.0) return 1.0;
  if (!r_series.empty()) {
    const double tv = first_coordinate(v);
    if (tv >= grid->t_lo - 1e-12 && tv <= grid->t_hi + 1e-12) {
      const double x = std::clamp((2.0 * tv - grid->t_lo - grid->t_hi) / (grid->t_hi - grid->t_lo), -1.0, 1.0);
      const double scale = v[0] + v[1];
      const double val = clenshaw(r_series, x);
      return std::abs(scale - 1.0) < 1e-15 ? val : val * std::pow(scale, s);
    }
    return r(v);
  }
  return grid->interpolate(r_s, v);
}

double SpectralSolution::nu(const std::function<double(std::span<const double>)>& phi) const {
  double acc = 0.0;
  for (size_t j = 0; j < nu_s.size(); ++j)
    if (nu_s[j] != 0.0) acc += nu_s[j] * phi(grid->node(j));
  return acc;
}

double SpectralSolution::nu_star(const std::function<double(std::span<const double>)>& phi) const {
  double acc = 0.0;
  for (size_t j = 0; j < nu_s_star.size(); ++j)
    if (nu_s_star[j] != 0.0) acc += nu_s_star[j] * phi(grid->node(j));
  return acc;
}

SpectralSolution solve_spectral(const FiniteEnsemble& ens, double s, const SimplexGrid& grid,
                                const SolveOptions& opt) {
  if (grid.dim != ens.dim) throw Error(ErrorCode::DimensionMismatch, "grid and ensemble dimensions differ");
  if (!std::isfinite(s) || std::abs(s) > opt.s_max)
    throw Error(ErrorCode::ConditionViolation, "s = " + std::to_string(s) + " is outside the guarded range");
  if (s < 0.0) {
    const ConditionReport cr = check_conditions(ens);
    if (!cr.a1) throw Error(ErrorCode::ConditionViolation, "negative s requires full comparability of entries");
  }
  SpectralSolution sol;
  sol.s = s;
  sol.ensemble = std::make_shared<const FiniteEnsemble>(ens);
  sol.grid = std::make_shared<const SimplexGrid>(grid);

  const LeftEigen star = left_power(build_kernel(ens, s, grid, true), opt);
  const LeftEigen fwd = left_power(build_kernel(ens, s, grid, false), opt);
  sol.nu_s_star = star.w;
  sol.nu_s = fwd.w;
  sol.kappa = s == 0.0 ? 1.0 : star.kappa;
  sol.kappa_conjugate = s == 0.0 ? 1.0 : fwd.kappa;
  sol.iterations = std::max(star.iterations, fwd.iterations);

  double neg = 0.0;
  sol.min_weight = 0.0;
  for (const auto* w : {&sol.nu_s, &sol.nu_s_star})
    for (double x : *w) sol.min_weight = std::min(sol.min_weight, x);
  for (const auto* w : {&sol.nu_s, &sol.nu_s_star}) {
    double m = 0.0;
    for (double x : *w)
      if (x < 0.0) m -= x;
    neg = std::max(neg, m);
  }
  if (grid.kind == GridKind::Linear && sol.min_weight < -1e-12)
    throw Error(ErrorCode::NegativeWeight, "linear-grid eigenmeasure has a negative weight");
  // A Chebyshev eigenvector is a functional on polynomials of degree N: its total variation is bounded by the
  // Lebesgue constant, 1 + (2/pi) log(N + 1). Anything larger means the iteration has not found a measure.
  const double lebesgue = 1.0 + 2.0 / std::numbers::pi * std::log(static_cast<double>(grid.size()));
  if (1.0 + 2.0 * neg > lebesgue + 1.0)
    throw Error(ErrorCode::NegativeWeight, "eigenmeasure total variation " + std::to_string(1.0 + 2.0 * neg) +
                                               " exceeds the interpolation bound");

  const size_t n = grid.size();
  sol.r_s.resize(n);
  sol.r_s_star.resize(n);
  for (size_t i = 0; i < n; ++i) {
    sol.r_s[i] = s == 0.0 ? 1.0 : sol.r(grid.node(i));
    sol.r_s_star[i] = s == 0.0 ? 1.0 : sol.r_star(grid.node(i));
    if (!(sol.r_s[i] > 0.0) || !(sol.r_s_star[i] > 0.0) || !std::isfinite(sol.r_s[i]) ||
        !std::isfinite(sol.r_s_star[i]))
      throw Error(ErrorCode::NegativeWeight, "eigenfunction is not strictly positive at a node");
  }
  sol.nu_r = 0.0;
  for (size_t j = 0; j < n; ++j) sol.nu_r += sol.nu_s[j] * sol.r_s[j];

  if (grid.kind == GridKind::Chebyshev) sol.r_series = chebyshev_coefficients(sol.r_s);

  if (opt.compute_residual && s != 0.0) {
    const auto d = static_cast<size_t>(grid.dim);
    std::vector<double> y(d);
    double rmax = 0.0, smax = 0.0, err = 0.0, serr = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double acc = 0.0, sacc = 0.0;
      for (size_t a = 0; a < ens.size(); ++a) {
        ens.atoms[a].apply(grid.node(i), y);
        double nrm = l1_norm(y);
        for (double& v : y) v /= nrm;
        acc += ens.probs[a] * std::exp(s * std::log(nrm)) * sol.r(y);
        ens.atoms[a].apply_transpose(grid.node(i), y);
        nrm = l1_norm(y);
        for (double& v : y) v /= nrm;
        sacc += ens.probs[a] * std::exp(s * std::log(nrm)) * sol.r_star(y);
      }
      err = std::max(err, std::abs(acc - sol.kappa * sol.r_s[i]));
      serr = std::max(serr, std::abs(sacc - sol.kappa * sol.r_s_star[i]));
      rmax = std::max(rmax, std::abs(sol.r_s[i]));
      smax = std::max(smax, std::abs(sol.r_s_star[i]));
    }
    sol.residual = err / (sol.kappa * rmax);
    sol.residual_conjugate = serr / (sol.kappa * smax);
  }
  return sol;
}

double stationary_pi(const SpectralSolution& sol, std::span<const double> phi) {
  double num = 0.0;
  for (size_t j = 0; j < sol.nu_s.size(); ++j) num += sol.nu_s[j] * phi[j] * sol.r_s[j];
  return num / sol.nu_r;
}

double CoefficientEigendata::nu_sf(std::span<const double> phi) const {
  double acc = 0.0;
  for (size_t j = 0; j < nu_weights.size(); ++j) acc += nu_weights[j] * phi[j];
  return acc;
}

CoefficientEigendata coefficient_eigendata(const SpectralSolution& sol, std::span<const double> f) {
  const SimplexGrid& grid = *sol.grid;
  const FiniteEnsemble& ens = *sol.ensemble;
  if (static_cast<int>(f.size()) != grid.dim) throw Error(ErrorCode::DimensionMismatch, "f has wrong dimension");
  if (sol.s < 0.0)
    for (double x : f)
      if (!(x > 0.0)) throw Error(ErrorCode::InvalidArgument, "negative s needs a strictly positive f");
  const double s = sol.s;
  auto pw = [s](double x) { return s == 0.0 ? 1.0 : std::exp(s * std::log(x)); };
  CoefficientEigendata out;
  const size_t n = grid.size();
  out.r_sf.resize(n);
  out.nu_weights.resize(n);
  for (size_t j = 0; j < n; ++j) {
    const double fx = pw(dot(f, grid.node(j)));
    out.r_sf[j] = sol.r_s[j] / fx;
    out.nu_weights[j] = sol.nu_s[j] * fx / sol.nu_r;
  }
  out.nu_of_r = out.nu_sf(out.r_sf);

  const auto d = static_cast<size_t>(grid.dim);
  std::vector<double> y(d), u(d);
  double err = 0.0, scale = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const auto x = grid.node(i);
    const double fxv = pw(dot(f, x));
    double acc = 0.0;
    for (size_t a = 0; a < ens.size(); ++a) {
      ens.atoms[a].apply(x, y);
      const double nrm = l1_norm(y);
      for (size_t k = 0; k < d; ++k) u[k] = y[k] / nrm;
      acc += ens.probs[a] * pw(dot(f, y)) / fxv * sol.r(u) / pw(dot(f, u));
    }
    err = std::max(err, std::abs(acc - sol.kappa * out.r_sf[i]));
    scale = std::max(scale, std::abs(out.r_sf[i]));
  }
  out.residual = err / (sol.kappa * scale);
  return out;
}

std::vector<KernelStep> markov_kernel_qs(const SpectralSolution& sol, std::span<const double> v) {
  const FiniteEnsemble& ens = *sol.ensemble;
  const auto d = static_cast<size_t>(ens.dim);
  std::vector<double> y(d);
  std::vector<KernelStep> out;
  double z = 0.0;
  for (size_t a = 0; a < ens.size(); ++a) {
    ens.atoms[a].apply(v, y);
    const double nrm = l1_norm(y);
    for (double& x : y) x /= nrm;
    const double w = sol.s == 0.0 ? ens.probs[a] : ens.probs[a] * std::exp(sol.s * std::log(nrm)) * sol.r_state(y);
    out.push_back({static_cast<int>(a), w, 0.0});
    z += w;
  }
  const double corr = sol.s == 0.0 ? 1.0 : z / (sol.kappa * sol.r(v));
  for (auto& k : out) {
    k.prob /= z;
    k.correction = corr;
  }
  return out;
}

std::vector<KernelStep> markov_kernel_qsf(const SpectralSolution& sol, std::span<const double> f,
                                          std::span<const double> v) {
  const FiniteEnsemble& ens = *sol.ensemble;
  const double s = sol.s;
  if (s == 0.0) return markov_kernel_qs(sol, v);
  const auto d = static_cast<size_t>(ens.dim);
  std::vector<double> y(d), u(d);
  std::vector<KernelStep> out;
  const double fv = dot(f, v);
  double z = 0.0;
  for (size_t a = 0; a < ens.size(); ++a) {
    ens.atoms[a].apply(v, y);
    const double nrm = l1_norm(y);
    for (size_t k = 0; k < d; ++k) u[k] = y[k] / nrm;
    const double r_sf = sol.r_state(u) / std::exp(s * std::log(dot(f, u)));
    const double w = ens.probs[a] * std::exp(s * (std::log(dot(f, y)) - std::log(fv))) * r_sf;
    out.push_back({static_cast<int>(a), w, 0.0});
    z += w;
  }
  const double corr = z / (sol.kappa * sol.r(v) / std::exp(s * std::log(fv)));
  for (auto& k : out) {
    k.prob /= z;
    k.correction = corr;
  }
  return out;
}

PerturbedCheck perturbed_eigenvalue_check(const FiniteEnsemble& ens, const SimplexGrid& grid, double s, double z,
                                          const SolveOptions& opt) {
  SolveOptions quiet = opt;
  quiet.compute_residual = false;
  const SpectralSolution sol = solve_spectral(ens, s, grid, quiet);
  const double kappa_sz = solve_spectral(ens, s + z, grid, quiet).kappa;
  auto L = [&](double x) { return std::log(solve_spectral(ens, x, grid, quiet).kappa); };
  const double h = 1e-3;
  const double d1 = (L(s + h) - L(s - h)) / (2 * h);
  const double d2 = (L(s + h / 2) - L(s - h / 2)) / h;
  const double q = (4.0 * d2 - d1) / 3.0;

  const size_t n = grid.size();
  const auto d = static_cast<size_t>(grid.dim);
  const double pref = std::exp(-q * z) / sol.kappa;
  std::vector<double> R(n * n, 0.0), y(d);
  std::vector<StencilEntry> st;
  for (size_t i = 0; i < n; ++i) {
    const double ri = sol.r_s[i];
    for (size_t a = 0; a < ens.size(); ++a) {
      ens.atoms[a].apply(grid.node(i), y);
      const double nrm = l1_norm(y);
      for (double& v : y) v /= nrm;
      const double w = pref / ri * ens.probs[a] * std::exp((s + z) * std::log(nrm)) * sol.r(y);
      grid.stencil(y, st);
      for (const auto& e : st) R[i * n + static_cast<size_t>(e.node)] += w * e.weight;
    }
  }
  std::vector<double> phi(n, 1.0), next(n);
  double lambda = 0.0;
  for (int it = 0; it < 5000; ++it) {
    for (size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (size_t j = 0; j < n; ++j) acc += R[i * n + j] * phi[j];
      next[i] = acc;
    }
    size_t imax = 0;
    for (size_t i = 1; i < n; ++i)
      if (std::abs(next[i]) > std::abs(next[imax])) imax = i;
    const double lam = next[imax] / phi[imax];
    const double norm = next[imax];
    double diff = 0.0;
    for (size_t i = 0; i < n; ++i) {
      next[i] /= norm;
      diff = std::max(diff, std::abs(next[i] - phi[i]));
    }
    phi.swap(next);
    const bool done = std::abs(lam - lambda) <= 1e-15 * std::abs(lam) && diff <= 1e-13;
    lambda = lam;
    if (done) break;
  }
  PerturbedCheck out{};
  out.lambda_operator = lambda;
  out.lambda_formula = std::exp(-q * z) * kappa_sz / sol.kappa;
  out.q = q;
  out.kappa_s = sol.kappa;
  out.kappa_sz = kappa_sz;
  out.discrepancy = std::abs(out.lambda_operator - out.lambda_formula);
  return out;
}

void write_spectral_csv(const SpectralSolution& sol, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  const SimplexGrid& g = *sol.grid;
  for (int k = 0; k < g.dim; ++k) out << "v_" << (k + 1) << ",";
  out << "r_s,nu_s,r_s_star,nu_s_star\n";
  out.precision(17);
  for (size_t i = 0; i < g.size(); ++i) {
    for (double c : g.node(i)) out << c << ",";
    out << sol.r_s[i] << "," << sol.nu_s[i] << "," << sol.r_s_star[i] << "," << sol.nu_s_star[i] << "\n";
  }
}

}  // namespace conelab
