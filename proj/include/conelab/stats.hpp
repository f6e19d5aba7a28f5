// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace conelab {

double normal_cdf(double x);
double normal_pdf(double x);

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
};

MeanSE mean_se(std::span<const double> x);
double median(std::vector<double> x);

// sup_y |F_emp(y) - F(y)| over all y, for a sorted sample and a continuous F.
double ks_distance(std::span<const double> sorted, const std::function<double(double)>& F);
// Empirical CDF P(X <= y) at each grid point, for a sorted sample.
std::vector<double> ecdf_at(std::span<const double> sorted, std::span<const double> grid);
std::vector<double> linspace(double a, double b, int n);

// Worker threads for sampling; CONELAB_WORKERS overrides the hardware count.
int worker_count();
// Runs task(i) for i in [0, n) on worker_count() threads. Tasks must write to disjoint outputs.
void parallel_for(size_t n, const std::function<void(size_t)>& task);

}  // namespace conelab
