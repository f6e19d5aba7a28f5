// SPDX-License-Identifier: Apache-2.0
#include "conelab/cone_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "conelab/errors.hpp"

namespace conelab {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonpositiveEntry: return "nonpositive-entry";
    case ErrorCode::BadProbabilityVector: return "bad-probability-vector";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::UnsupportedDimension: return "unsupported-dimension";
    case ErrorCode::NoConvergence: return "no-convergence";
    case ErrorCode::NegativeWeight: return "negative-weight";
    case ErrorCode::ConditionViolation: return "condition-violation";
    case ErrorCode::QOutOfRange: return "q-out-of-range";
    case ErrorCode::DerivativeUnstable: return "derivative-unstable";
    case ErrorCode::IterationBudgetExceeded: return "iteration-budget-exceeded";
    case ErrorCode::SchemaViolation: return "schema-violation";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::IntervalTooNarrow: return "interval-too-narrow";
    case ErrorCode::WrongTilt: return "wrong-tilt";
  }
  return "unknown";
}

PositiveMatrix::PositiveMatrix(int dim, std::vector<double> entries) : dim_(dim), a_(std::move(entries)) {
  if (dim < 1 || a_.size() != static_cast<size_t>(dim) * static_cast<size_t>(dim)) {
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(dim * dim) + " entries, got " + std::to_string(a_.size()));
  }
  for (double x : a_) {
    if (!std::isfinite(x) || !(x > 0.0)) {
      throw Error(ErrorCode::NonpositiveEntry, "matrix entry " + std::to_string(x) + " is not a positive finite number");
    }
  }
}

PositiveMatrix::PositiveMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : PositiveMatrix(static_cast<int>(rows.size()), [&] {
        std::vector<double> e;
        for (const auto& r : rows) {
          if (r.size() != rows.size()) throw Error(ErrorCode::DimensionMismatch, "matrix is not square");
          e.insert(e.end(), r.begin(), r.end());
        }
        return e;
      }()) {}

PositiveMatrix PositiveMatrix::transpose() const {
  std::vector<double> t(a_.size());
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) t[static_cast<size_t>(j * dim_ + i)] = (*this)(i, j);
  return PositiveMatrix(dim_, std::move(t));
}

PositiveMatrix PositiveMatrix::scaled(double c) const {
  std::vector<double> t(a_);
  for (double& x : t) x *= c;
  return PositiveMatrix(dim_, std::move(t));
}

void PositiveMatrix::apply(std::span<const double> x, std::span<double> y) const {
  for (int i = 0; i < dim_; ++i) {
    double acc = 0.0;
    for (int j = 0; j < dim_; ++j) acc += (*this)(i, j) * x[static_cast<size_t>(j)];
    y[static_cast<size_t>(i)] = acc;
  }
}

void PositiveMatrix::apply_transpose(std::span<const double> x, std::span<double> y) const {
  for (int j = 0; j < dim_; ++j) {
    double acc = 0.0;
    for (int i = 0; i < dim_; ++i) acc += (*this)(i, j) * x[static_cast<size_t>(i)];
    y[static_cast<size_t>(j)] = acc;
  }
}

PositiveMatrix multiply(const PositiveMatrix& a, const PositiveMatrix& b) {
  if (a.dim() != b.dim()) throw Error(ErrorCode::DimensionMismatch, "cannot multiply matrices of different size");
  const int d = a.dim();
  std::vector<double> c(static_cast<size_t>(d * d), 0.0);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k)
      for (int j = 0; j < d; ++j) c[static_cast<size_t>(i * d + j)] += a(i, k) * b(k, j);
  return PositiveMatrix(d, std::move(c));
}

SimplexPoint::SimplexPoint(std::vector<double> coords, double tol) : c_(std::move(coords)) {
  if (c_.empty()) throw Error(ErrorCode::DimensionMismatch, "empty simplex point");
  double s = 0.0;
  for (double x : c_) {
    if (!std::isfinite(x) || x < 0.0) throw Error(ErrorCode::InvalidArgument, "simplex coordinate must be >= 0");
    s += x;
  }
  if (std::abs(s - 1.0) > tol) throw Error(ErrorCode::InvalidArgument, "simplex coordinates must sum to 1");
}

SimplexPoint SimplexPoint::normalized(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) {
    if (!std::isfinite(v) || v < 0.0) throw Error(ErrorCode::InvalidArgument, "vector must be nonnegative");
    s += v;
  }
  if (!(s > 0.0)) throw Error(ErrorCode::InvalidArgument, "zero vector has no direction");
  std::vector<double> c(x.begin(), x.end());
  for (double& v : c) v /= s;
  return SimplexPoint(std::move(c), 1e-9);
}

SimplexPoint SimplexPoint::barycenter(int dim) {
  return SimplexPoint(std::vector<double>(static_cast<size_t>(dim), 1.0 / dim), 1e-9);
}

SimplexPoint SimplexPoint::basis(int dim, int i) {
  std::vector<double> c(static_cast<size_t>(dim), 0.0);
  c[static_cast<size_t>(i)] = 1.0;
  return SimplexPoint(std::move(c));
}

bool SimplexPoint::interior(double eps) const {
  return *std::min_element(c_.begin(), c_.end()) >= eps;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l1_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += std::abs(v);
  return s;
}

double matrix_norm(const PositiveMatrix& g) {
  double s = 0.0;
  for (double x : g.entries()) s += x;
  return s;
}

double log_N(const PositiveMatrix& g) { return std::abs(std::log(matrix_norm(g))); }

double m_ratio(std::span<const double> u, std::span<const double> v) {
  double m = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < u.size(); ++i) {
    if (v[i] > 0.0) {
      if (u[i] <= 0.0) return 0.0;
      m = std::min(m, u[i] / v[i]);
    }
  }
  return m;
}

double hilbert_distance(std::span<const double> u, std::span<const double> v) {
  const double p = m_ratio(u, v) * m_ratio(v, u);
  if (!std::isfinite(p)) return 0.0;
  return std::clamp((1.0 - p) / (1.0 + p), 0.0, 1.0);
}

double hilbert_distance(const SimplexPoint& u, const SimplexPoint& v) {
  return hilbert_distance(u.coords(), v.coords());
}

SimplexPoint project_action(const PositiveMatrix& g, const SimplexPoint& v) {
  std::vector<double> y(static_cast<size_t>(g.dim()));
  g.apply(v.coords(), y);
  return SimplexPoint::normalized(y);
}

double cocycle_log_norm(const PositiveMatrix& g, const SimplexPoint& v) {
  std::vector<double> y(static_cast<size_t>(g.dim()));
  g.apply(v.coords(), y);
  return std::log(l1_norm(y));
}

CollatzWielandt collatz_wielandt(std::span<const double> g, int dim, double tol, int max_iter) {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
  const auto d = static_cast<size_t>(dim);
  std::vector<double> v(d, 1.0 / dim), w(d);
  CollatzWielandt out{0.0, 0.0, 0.0, 0, {}};
  for (int it = 1; it <= max_iter; ++it) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0, s = 0.0;
    for (size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (size_t j = 0; j < d; ++j) acc += g[i * d + j] * v[j];
      w[i] = acc;
      s += acc;
      const double r = acc / v[i];
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    const double rho = 0.5 * (lo + hi);
    if (hi - lo <= tol * rho) {
      out = {rho, lo, hi, it, v};
      return out;
    }
    for (size_t i = 0; i < d; ++i) v[i] = w[i] / s;
  }
  throw Error(ErrorCode::IterationBudgetExceeded,
              "Collatz-Wielandt gap did not reach tolerance in " + std::to_string(max_iter) + " iterations");
}

double spectral_radius_cw(const PositiveMatrix& g, double tol, int max_iter) {
  return collatz_wielandt(g.entries(), g.dim(), tol, max_iter).rho;
}

double kesten_ratio(const PositiveMatrix& g, bool columnwise) {
  const int d = g.dim();
  if (!columnwise) {
    const auto [mn, mx] = std::minmax_element(g.entries().begin(), g.entries().end());
    return *mx / *mn;
  }
  double worst = 1.0;
  for (int j = 0; j < d; ++j) {
    double mn = g(0, j), mx = g(0, j);
    for (int i = 1; i < d; ++i) {
      mn = std::min(mn, g(i, j));
      mx = std::max(mx, g(i, j));
    }
    worst = std::max(worst, mx / mn);
  }
  return worst;
}

}  // namespace conelab
