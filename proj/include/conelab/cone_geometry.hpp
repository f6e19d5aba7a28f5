// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

namespace conelab {

// d x d matrix with strictly positive entries, stored row-major.
class PositiveMatrix {
 public:
  PositiveMatrix(int dim, std::vector<double> entries);
  PositiveMatrix(std::initializer_list<std::initializer_list<double>> rows);

  int dim() const { return dim_; }
  double operator()(int i, int j) const { return a_[static_cast<size_t>(i * dim_ + j)]; }
  const std::vector<double>& entries() const { return a_; }

  PositiveMatrix transpose() const;
  PositiveMatrix scaled(double c) const;
  // y = g x
  void apply(std::span<const double> x, std::span<double> y) const;
  // y = g^T x
  void apply_transpose(std::span<const double> x, std::span<double> y) const;

 private:
  int dim_;
  std::vector<double> a_;
};

PositiveMatrix multiply(const PositiveMatrix& a, const PositiveMatrix& b);

// Nonnegative vector with unit L1 norm.
class SimplexPoint {
 public:
  explicit SimplexPoint(std::vector<double> coords, double tol = 1e-12);
  // Rescales a nonnegative nonzero vector onto the simplex.
  static SimplexPoint normalized(std::span<const double> x);
  static SimplexPoint barycenter(int dim);
  static SimplexPoint basis(int dim, int i);

  int dim() const { return static_cast<int>(c_.size()); }
  double operator[](int i) const { return c_[static_cast<size_t>(i)]; }
  std::span<const double> coords() const { return c_; }
  bool interior(double eps) const;

 private:
  std::vector<double> c_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l1_norm(std::span<const double> x);

double matrix_norm(const PositiveMatrix& g);
double log_N(const PositiveMatrix& g);

// m(u,v) = sup{λ > 0 : λ v <= u}, with the conventions documented in the README.
double m_ratio(std::span<const double> u, std::span<const double> v);
double hilbert_distance(const SimplexPoint& u, const SimplexPoint& v);
double hilbert_distance(std::span<const double> u, std::span<const double> v);

SimplexPoint project_action(const PositiveMatrix& g, const SimplexPoint& v);
double cocycle_log_norm(const PositiveMatrix& g, const SimplexPoint& v);

struct CollatzWielandt {
  double rho;
  double lower;
  double upper;
  int iterations;
  std::vector<double> direction;
};

// Power iteration from the barycenter; stops once max-min of (gv)_i/v_i <= tol * rho.
CollatzWielandt collatz_wielandt(std::span<const double> g, int dim, double tol = 1e-10,
                                 int max_iter = 100000);
double spectral_radius_cw(const PositiveMatrix& g, double tol = 1e-10, int max_iter = 100000);

double kesten_ratio(const PositiveMatrix& g, bool columnwise);

}  // namespace conelab
