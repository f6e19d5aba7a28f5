// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "conelab/transfer_operator.hpp"

namespace conelab {

class LambdaCache;

struct CumulantTable {
  std::vector<double> s_samples;
  std::vector<double> Lambda;
  // Derivatives at the samples: from the cubic spline and from Richardson central differences.
  std::vector<double> d1_spline, d2_spline, d3_spline;
  std::vector<double> d1_fd, d2_fd, d3_fd;
  double max_d1_discrepancy = 0.0;
  double max_d3_discrepancy = 0.0;
  double min_second_difference = 0.0;
  bool convex = true;
  double lambda1 = 0.0;
  double sigma2 = 0.0;
  double m3 = 0.0;
  double s_lo = 0.0;
  double s_hi = 0.0;
  std::vector<std::string> warnings;
  std::shared_ptr<LambdaCache> cache;

  // Lambda at any s in the guarded range (evaluated on demand, memoized).
  double Lambda_at(double s) const;
  // k-th derivative, k in 1..5, by Richardson-extrapolated central differences.
  double derivative(double s, int k) const;
  // Spline value (k = 0) or derivative (k = 1..3).
  double spline(double s, int k) const;
  double sigma_s(double s) const;
};

// 41 equally spaced samples on [-2, 2].
std::vector<double> default_s_samples();

// s_samples must be equally spaced, sorted, and contain 0.
CumulantTable lambda_curve(const FiniteEnsemble& ens, const SimplexGrid& grid, const std::vector<double>& s_samples,
                           const SolveOptions& opt = {});
// Same table for a Lambda supplied directly (closed forms, tests).
CumulantTable lambda_curve(std::function<double(double)> Lambda, const std::vector<double>& s_samples);

struct Cumulants {
  double lambda1;
  double sigma2;
  double m3;
};

Cumulants cumulants(const CumulantTable& table);

struct LegendreResult {
  double s_star;
  double rate;
  int iterations;
};

// Solves Lambda'(s) = q on [s_lo, s_hi]; rate = s q - Lambda(s).
LegendreResult legendre(const CumulantTable& table, double q);

// Truncated Cramér series zeta_s(t) through t^2.
double cramer_series(const CumulantTable& table, double s, double t);

// Columns s, Lambda, Lambda', Lambda'', Lambda'''.
void write_lambda_csv(const CumulantTable& table, const std::string& path);
// Columns q, s_star, rate for q = Lambda'(s) at the table samples.
void write_legendre_csv(const CumulantTable& table, const std::string& path);

}  // namespace conelab
