// SPDX-License-Identifier: Apache-2.0
#include "conelab/rate_function.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>

#include "conelab/errors.hpp"

namespace conelab {

class LambdaCache {
 public:
  explicit LambdaCache(std::function<double(double)> f) : f_(std::move(f)) {}

  double operator()(double s) {
    {
      std::lock_guard<std::mutex> lock(m_);
      auto it = values_.find(s);
      if (it != values_.end()) return it->second;
    }
    const double v = f_(s);
    std::lock_guard<std::mutex> lock(m_);
    values_.emplace(s, v);
    return v;
  }

  std::unique_ptr<boost::math::interpolators::cardinal_cubic_b_spline<double>> spline;

 private:
  std::function<double(double)> f_;
  std::map<double, double> values_;
  std::mutex m_;
};

namespace {

constexpr double kStepLow = 1e-3;   // orders 1-3
constexpr double kStepHigh = 5e-2;  // orders 4-5

double central_difference(LambdaCache& L, double s, int k, double h) {
  switch (k) {
    case 1: return (L(s + h) - L(s - h)) / (2 * h);
    case 2: return (L(s + h) - 2 * L(s) + L(s - h)) / (h * h);
    case 3: return (L(s + 2 * h) - 2 * L(s + h) + 2 * L(s - h) - L(s - 2 * h)) / (2 * h * h * h);
    case 4: return (L(s + 2 * h) - 4 * L(s + h) + 6 * L(s) - 4 * L(s - h) + L(s - 2 * h)) / (h * h * h * h);
    case 5:
      return (L(s + 3 * h) - 4 * L(s + 2 * h) + 5 * L(s + h) - 5 * L(s - h) + 4 * L(s - 2 * h) - L(s - 3 * h)) /
             (2 * h * h * h * h * h);
    default: throw Error(ErrorCode::InvalidArgument, "derivative order must be in 1..5");
  }
}

CumulantTable build_table(std::shared_ptr<LambdaCache> cache, const std::vector<double>& samples) {
  if (samples.size() < 5) throw Error(ErrorCode::InvalidArgument, "need at least 5 s samples");
  const double h = samples[1] - samples[0];
  bool has_zero = false;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (i > 0 && std::abs(samples[i] - samples[i - 1] - h) > 1e-9 * std::max(1.0, std::abs(h)))
      throw Error(ErrorCode::InvalidArgument, "s samples must be equally spaced and increasing");
    if (samples[i] == 0.0) has_zero = true;
  }
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "s samples must be increasing");
  if (!has_zero) throw Error(ErrorCode::InvalidArgument, "s samples must include 0");

  CumulantTable t;
  t.cache = cache;
  t.s_samples = samples;
  t.s_lo = samples.front();
  t.s_hi = samples.back();
  for (double s : samples) t.Lambda.push_back((*cache)(s));
  const double left = central_difference(*cache, t.s_lo, 1, kStepLow);
  const double right = central_difference(*cache, t.s_hi, 1, kStepLow);
  cache->spline = std::make_unique<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
      t.Lambda.begin(), t.Lambda.end(), t.s_lo, h, left, right);

  t.min_second_difference = INFINITY;
  for (size_t i = 1; i + 1 < samples.size(); ++i)
    t.min_second_difference = std::min(t.min_second_difference, t.Lambda[i + 1] - 2 * t.Lambda[i] + t.Lambda[i - 1]);
  t.convex = t.min_second_difference >= -1e-8;
  if (!t.convex) t.warnings.push_back("nonconvex-curve: second difference " + std::to_string(t.min_second_difference));

  for (double s : samples) {
    t.d1_spline.push_back(t.spline(s, 1));
    t.d2_spline.push_back(t.spline(s, 2));
    t.d3_spline.push_back(t.spline(s, 3));
    t.d1_fd.push_back(t.derivative(s, 1));
    t.d2_fd.push_back(t.derivative(s, 2));
    t.d3_fd.push_back(t.derivative(s, 3));
    t.max_d1_discrepancy = std::max(t.max_d1_discrepancy, std::abs(t.d1_spline.back() - t.d1_fd.back()));
    t.max_d3_discrepancy = std::max(t.max_d3_discrepancy, std::abs(t.d3_spline.back() - t.d3_fd.back()));
  }
  t.lambda1 = t.derivative(0.0, 1);
  t.sigma2 = t.derivative(0.0, 2);
  t.m3 = t.derivative(0.0, 3);
  return t;
}

}  // namespace

double CumulantTable::Lambda_at(double s) const { return (*cache)(s); }

double CumulantTable::derivative(double s, int k) const {
  const double h = k <= 3 ? kStepLow : kStepHigh;
  const double coarse = central_difference(*cache, s, k, h);
  const double fine = central_difference(*cache, s, k, h / 2);
  return (4.0 * fine - coarse) / 3.0;
}

double CumulantTable::spline(double s, int k) const {
  const auto& sp = *cache->spline;
  switch (k) {
    case 0: return sp(s);
    case 1: return sp.prime(s);
    case 2: return sp.double_prime(s);
    case 3: {
      // Lambda'' of a cubic spline is piecewise linear; difference it across one knot spacing.
      const double h = s_samples[1] - s_samples[0];
      const double a = std::max(s_lo, s - h), b = std::min(s_hi, s + h);
      return (sp.double_prime(b) - sp.double_prime(a)) / (b - a);
    }
    default: throw Error(ErrorCode::InvalidArgument, "spline derivative order must be in 0..3");
  }
}

double CumulantTable::sigma_s(double s) const {
  const double g2 = derivative(s, 2);
  if (!(g2 > 0.0)) throw Error(ErrorCode::DerivativeUnstable, "Lambda''(s) is not positive");
  return std::sqrt(g2);
}

std::vector<double> default_s_samples() {
  std::vector<double> s;
  for (int i = -20; i <= 20; ++i) s.push_back(i / 10.0);
  return s;
}

CumulantTable lambda_curve(const FiniteEnsemble& ens, const SimplexGrid& grid, const std::vector<double>& s_samples,
                           const SolveOptions& opt) {
  auto e = std::make_shared<const FiniteEnsemble>(ens);
  auto g = std::make_shared<const SimplexGrid>(grid);
  SolveOptions o = opt;
  o.compute_residual = false;
  auto cache = std::make_shared<LambdaCache>(
      [e, g, o](double s) { return s == 0.0 ? 0.0 : std::log(solve_spectral(*e, s, *g, o).kappa); });
  return build_table(cache, s_samples);
}

CumulantTable lambda_curve(std::function<double(double)> Lambda, const std::vector<double>& s_samples) {
  return build_table(std::make_shared<LambdaCache>(std::move(Lambda)), s_samples);
}

Cumulants cumulants(const CumulantTable& table) { return {table.lambda1, table.sigma2, table.m3}; }

LegendreResult legendre(const CumulantTable& table, double q) {
  const double qlo = table.derivative(table.s_lo, 1);
  const double qhi = table.derivative(table.s_hi, 1);
  if (!(q >= qlo && q <= qhi))
    throw Error(ErrorCode::QOutOfRange,
                "q = " + std::to_string(q) + " outside [" + std::to_string(qlo) + ", " + std::to_string(qhi) + "]");
  // bracket with the spline, then Newton on the difference quotients
  double a = table.s_lo, b = table.s_hi;
  for (int i = 0; i < 60 && b - a > 1e-6; ++i) {
    const double m = 0.5 * (a + b);
    (table.spline(m, 1) < q ? a : b) = m;
  }
  double s = 0.5 * (a + b);
  a = table.s_lo;
  b = table.s_hi;
  int it = 0;
  for (; it < 50; ++it) {
    const double g = table.derivative(s, 1) - q;
    if (std::abs(g) <= 1e-12 * std::max(1.0, std::abs(q))) break;
    (g < 0 ? a : b) = s;
    const double h2 = table.derivative(s, 2);
    double next = h2 > 0.0 ? s - g / h2 : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (std::abs(next - s) < 1e-15) {
      s = next;
      break;
    }
    s = next;
  }
  return {s, s * q - table.Lambda_at(s), it};
}

double cramer_series(const CumulantTable& table, double s, double t) {
  const double g2 = table.derivative(s, 2);
  if (g2 < 1e-10) throw Error(ErrorCode::DerivativeUnstable, "Lambda''(s) below 1e-10");
  const double g3 = table.derivative(s, 3);
  const double g4 = table.derivative(s, 4);
  const double g5 = table.derivative(s, 5);
  const double c0 = g3 / (6.0 * std::pow(g2, 1.5));
  const double c1 = (g4 * g2 - 3.0 * g3 * g3) / (24.0 * g2 * g2 * g2);
  const double c2 = (g5 * g2 * g2 - 10.0 * g4 * g3 * g2 + 15.0 * g3 * g3 * g3) / (120.0 * std::pow(g2, 4.5));
  return c0 + c1 * t + c2 * t * t;
}

void write_lambda_csv(const CumulantTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out.precision(17);
  out << "s,Lambda,Lambda',Lambda'',Lambda'''\n";
  for (size_t i = 0; i < table.s_samples.size(); ++i)
    out << table.s_samples[i] << "," << table.Lambda[i] << "," << table.d1_fd[i] << "," << table.d2_fd[i] << ","
        << table.d3_fd[i] << "\n";
}

void write_legendre_csv(const CumulantTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out.precision(17);
  out << "q,s_star,rate\n";
  for (size_t i = 0; i < table.s_samples.size(); ++i) {
    const double s = table.s_samples[i];
    const double q = table.d1_fd[i];
    out << q << "," << s << "," << s * q - table.Lambda[i] << "\n";
  }
}

}  // namespace conelab
