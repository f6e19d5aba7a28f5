// SPDX-License-Identifier: Apache-2.0
#include "conelab/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

namespace conelab {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

MeanSE mean_se(std::span<const double> x) {
  MeanSE r;
  const auto n = static_cast<double>(x.size());
  if (x.empty()) return r;
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  r.mean = m;
  r.se = x.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return r;
}

double median(std::vector<double> x) {
  if (x.empty()) return 0.0;
  std::sort(x.begin(), x.end());
  const size_t n = x.size();
  return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

double ks_distance(std::span<const double> sorted, const std::function<double(double)>& F) {
  const auto n = static_cast<double>(sorted.size());
  double sup = 0.0;
  size_t i = 0;
  while (i < sorted.size()) {
    size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double f = F(sorted[i]);
    sup = std::max({sup, std::abs(static_cast<double>(i) / n - f), std::abs(static_cast<double>(j + 1) / n - f)});
    i = j + 1;
  }
  return sup;
}

std::vector<double> ecdf_at(std::span<const double> sorted, std::span<const double> grid) {
  std::vector<double> out;
  out.reserve(grid.size());
  for (double y : grid) {
    const auto k = std::upper_bound(sorted.begin(), sorted.end(), y) - sorted.begin();
    out.push_back(static_cast<double>(k) / static_cast<double>(sorted.size()));
  }
  return out;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
  return out;
}

int worker_count() {
  if (const char* env = std::getenv("CONELAB_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(size_t n, const std::function<void(size_t)>& task) {
  const auto workers = static_cast<size_t>(std::max(1, worker_count()));
  if (workers == 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace conelab
