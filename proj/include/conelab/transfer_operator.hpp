// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "conelab/ensemble.hpp"

namespace conelab {

enum class GridKind { Linear, Chebyshev };

const char* grid_kind_name(GridKind kind);
GridKind parse_grid_kind(const std::string& name);

struct StencilEntry {
  int node;
  double weight;
};

// Discretization of the simplex. Linear grids cover the whole simplex (d = 2 or 3) and interpolate
// piecewise linearly in barycentric coordinates. Chebyshev grids (d = 2) place Chebyshev-Lobatto
// points on a parameter interval [t_lo, t_hi] of the first coordinate and use barycentric
// Lagrange interpolation.
class SimplexGrid {
 public:
  int dim = 2;
  int resolution = 0;
  GridKind kind = GridKind::Linear;
  double t_lo = 0.0;
  double t_hi = 1.0;
  std::vector<double> coords;   // size() * dim, row per node
  std::vector<double> weights;  // quadrature weights, sum = measure of the covered parameter set
  std::vector<double> t;        // d = 2: first coordinate of each node
  std::vector<double> bary;     // Chebyshev barycentric weights

  size_t size() const { return coords.size() / static_cast<size_t>(dim); }
  std::span<const double> node(size_t i) const {
    return {coords.data() + i * static_cast<size_t>(dim), static_cast<size_t>(dim)};
  }
  // Interpolation weights at a point of the simplex (rescaled if not normalized). Weights sum to 1.
  void stencil(std::span<const double> point, std::vector<StencilEntry>& out) const;
  double interpolate(std::span<const double> values, std::span<const double> point) const;
};

// Uniform grid on the whole simplex: resolution+1 nodes (d = 2) or the triangular lattice (d = 3).
SimplexGrid build_grid(int d, int resolution);
// Chebyshev-Lobatto grid with resolution+1 nodes on [t_lo, t_hi] (d = 2).
SimplexGrid build_chebyshev_grid(int resolution, double t_lo, double t_hi);
// Interval of first coordinates containing g·S and g^T·S for every atom (d = 2).
std::pair<double, double> invariant_interval(const FiniteEnsemble& ens);
// Chebyshev grid on the invariant interval for d = 2, linear grid otherwise.
SimplexGrid build_adapted_grid(const FiniteEnsemble& ens, int resolution, GridKind kind = GridKind::Chebyshev);

// (P_s phi)(x_i) = sum_g p_g ||g x_i||^s phi(g·x_i) with phi interpolated on the grid.
std::vector<double> apply_Ps(const FiniteEnsemble& ens, double s, const SimplexGrid& grid,
                             std::span<const double> phi);

struct SolveOptions {
  double tol = 1e-10;
  int max_iter = 100000;
  double s_max = 4.0;
  bool compute_residual = true;
};

class SpectralSolution {
 public:
  double s = 0.0;
  double kappa = 1.0;
  double kappa_conjugate = 1.0;  // from the P_s pass; agrees with kappa up to discretization
  std::vector<double> r_s;       // node values
  std::vector<double> nu_s;      // weights on nodes, sum 1
  std::vector<double> r_s_star;
  std::vector<double> nu_s_star;
  double residual = 0.0;            // max-node relative error of P_s r_s - kappa r_s
  double residual_conjugate = 0.0;  // same for P_s^*
  double nu_r = 1.0;                // nu_s(r_s)
  double min_weight = 0.0;          // most negative node weight across nu_s, nu_s_star
  int iterations = 0;
  std::string normalization = "integral";
  std::shared_ptr<const FiniteEnsemble> ensemble;
  std::shared_ptr<const SimplexGrid> grid;

  // r_s(x) = ∫ <x,u>^s dnu_s^*(u) for any nonzero x in R^d_+.
  double r(std::span<const double> x) const;
  // r_s^*(x) = ∫ <x,u>^s dnu_s(u).
  double r_star(std::span<const double> x) const;
  // r_s at a simplex point, using a Chebyshev series on the grid interval when available.
  double r_state(std::span<const double> v) const;
  // nu_s(phi) for phi evaluated at the nodes.
  double nu(const std::function<double(std::span<const double>)>& phi) const;
  double nu_star(const std::function<double(std::span<const double>)>& phi) const;

  // Chebyshev coefficients of t -> r_s(t, 1-t) on [t_lo, t_hi]; empty for linear grids.
  std::vector<double> r_series;
};

SpectralSolution solve_spectral(const FiniteEnsemble& ens, double s, const SimplexGrid& grid,
                                const SolveOptions& opt = {});

// pi_s(phi) = nu_s(phi r_s) / nu_s(r_s); phi is a grid function.
double stationary_pi(const SpectralSolution& sol, std::span<const double> phi);

struct CoefficientEigendata {
  std::vector<double> r_sf;        // node values of r_{s,f} = r_s / <f,.>^s
  std::vector<double> nu_weights;  // nu_{s,f}(phi) = sum_j nu_weights[j] phi(x_j)
  double nu_of_r = 1.0;            // nu_{s,f}(r_{s,f})
  double residual = 0.0;           // relative error of P_{s,f} r_{s,f} = kappa r_{s,f} at the nodes

  double nu_sf(std::span<const double> phi) const;
};

CoefficientEigendata coefficient_eigendata(const SpectralSolution& sol, std::span<const double> f);

struct KernelStep {
  int atom;
  double prob;
  double correction;  // realized normalizer / (kappa r_s(v))
};

// One step of Q_s from v: probability ∝ p_g ||g v||^s r_s(g·v).
std::vector<KernelStep> markov_kernel_qs(const SpectralSolution& sol, std::span<const double> v);
// One step of Q_{s,f} from v: probability ∝ p_g <f,gv>^s/<f,v>^s r_{s,f}(g·v).
std::vector<KernelStep> markov_kernel_qsf(const SpectralSolution& sol, std::span<const double> f,
                                          std::span<const double> v);

struct PerturbedCheck {
  double lambda_operator;  // dominant eigenvalue of the discretized R_{s,z}
  double lambda_formula;   // e^{-qz} kappa(s+z)/kappa(s)
  double q;
  double kappa_s;
  double kappa_sz;
  double discrepancy;
};

PerturbedCheck perturbed_eigenvalue_check(const FiniteEnsemble& ens, const SimplexGrid& grid, double s, double z,
                                          const SolveOptions& opt = {});

// Columns v_1..v_d, r_s, nu_s, r_s_star, nu_s_star.
void write_spectral_csv(const SpectralSolution& sol, const std::string& path);

}  // namespace conelab
