// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "conelab/cone_geometry.hpp"
#include "conelab/errors.hpp"
#include "doctest.h"

using namespace conelab;

namespace {

// Brute-force Perron root: many power iterations, then the Rayleigh-type ratio.
double power_oracle(const PositiveMatrix& g) {
  const int d = g.dim();
  std::vector<double> v(static_cast<size_t>(d), 1.0), y(static_cast<size_t>(d));
  double lambda = 0.0;
  for (int k = 0; k < 2000; ++k) {
    g.apply(v, y);
    lambda = l1_norm(y) / l1_norm(v);
    for (int i = 0; i < d; ++i) v[static_cast<size_t>(i)] = y[static_cast<size_t>(i)] / l1_norm(y);
  }
  return lambda;
}

}  // namespace

TEST_SUITE("cone-geometry") {
  TEST_CASE("matrix norm is the sum of entries") {
    CHECK(matrix_norm(PositiveMatrix{{2, 1}, {1, 2}}) == 6.0);
    CHECK(matrix_norm(PositiveMatrix{{1, 1}, {1, 1}}) == 4.0);
    CHECK(matrix_norm(PositiveMatrix{{2, 1}, {1, 2}}.scaled(3.0)) == doctest::Approx(18.0));
  }

  TEST_CASE("log N") {
    CHECK(log_N(PositiveMatrix{{2, 1}, {1, 2}}) == doctest::Approx(std::log(6.0)));
    CHECK(log_N(PositiveMatrix{{0.125, 0.125}, {0.125, 0.125}}) == doctest::Approx(std::log(2.0)));
    CHECK(log_N(PositiveMatrix{{0.25, 0.25}, {0.25, 0.25}}) == doctest::Approx(0.0));
  }

  TEST_CASE("positivity is enforced") {
    CHECK_THROWS_AS(PositiveMatrix({{1, 0}, {1, 1}}), Error);
    try {
      PositiveMatrix({{1, 0}, {1, 1}});
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonpositiveEntry);
    }
    CHECK_THROWS_AS(SimplexPoint({0.5, 0.6}), Error);
  }

  TEST_CASE("Hilbert distance") {
    CHECK(hilbert_distance(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5}) == doctest::Approx(0.0));
    CHECK(hilbert_distance(std::vector<double>{0.75, 0.25}, std::vector<double>{0.5, 0.5}) == doctest::Approx(0.5));
    CHECK(m_ratio(std::vector<double>{0.75, 0.25}, std::vector<double>{0.5, 0.5}) == doctest::Approx(0.5));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(0.01, 1.0);
    for (int k = 0; k < 1000; ++k) {
      std::vector<double> u{U(rng), U(rng), U(rng)}, v{U(rng), U(rng), U(rng)};
      const double a = hilbert_distance(u, v), b = hilbert_distance(v, u);
      CHECK(a == doctest::Approx(b).epsilon(1e-12));
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
    }
  }

  TEST_CASE("positive matrices contract the Hilbert distance") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(0.1, 3.0);
    for (int k = 0; k < 200; ++k) {
      PositiveMatrix g(2, {U(rng), U(rng), U(rng), U(rng)});
      auto u = SimplexPoint::normalized(std::vector<double>{U(rng), U(rng)});
      auto v = SimplexPoint::normalized(std::vector<double>{U(rng), U(rng)});
      CHECK(hilbert_distance(project_action(g, u), project_action(g, v)) <= hilbert_distance(u, v) + 1e-12);
    }
  }

  TEST_CASE("projective action and cocycle") {
    PositiveMatrix g{{2, 1}, {1, 2}};
    auto x = project_action(PositiveMatrix{{1, 1}, {1, 1}}, SimplexPoint::basis(2, 0));
    CHECK(x[0] == doctest::Approx(0.5));
    auto y = project_action(g, SimplexPoint::basis(2, 0));
    CHECK(y[0] == doctest::Approx(2.0 / 3.0));
    CHECK(y[1] == doctest::Approx(1.0 / 3.0));
    auto z = SimplexPoint::basis(2, 0);
    for (int k = 0; k < 60; ++k) z = project_action(g, z);
    CHECK(z[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(cocycle_log_norm(g, SimplexPoint::barycenter(2)) == doctest::Approx(std::log(3.0)));
    CHECK(cocycle_log_norm(PositiveMatrix{{1, 1}, {1, 1}}, SimplexPoint::basis(2, 0)) == doctest::Approx(std::log(2.0)));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0.01, 5.0);
    for (int k = 0; k < 1000; ++k) {
      PositiveMatrix h(3, {U(rng), U(rng), U(rng), U(rng), U(rng), U(rng), U(rng), U(rng), U(rng)});
      auto v = SimplexPoint::normalized(std::vector<double>{U(rng), U(rng), U(rng)});
      CHECK(cocycle_log_norm(h, v) <= std::log(matrix_norm(h)) + 1e-12);
    }
  }

  TEST_CASE("Collatz-Wielandt spectral radius") {
    PositiveMatrix g{{2, 1}, {1, 2}};
    CHECK(spectral_radius_cw(g) == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(spectral_radius_cw(PositiveMatrix{{1, 1}, {1, 1}}) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(spectral_radius_cw(g.scaled(5.0)) == doctest::Approx(15.0).epsilon(1e-10));
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(0.05, 2.0);
    for (int k = 0; k < 50; ++k) {
      PositiveMatrix h(3, {U(rng), U(rng), U(rng), U(rng), U(rng), U(rng), U(rng), U(rng), U(rng)});
      const auto cw = collatz_wielandt(h.entries(), 3);
      CHECK(cw.lower <= cw.rho);
      CHECK(cw.rho <= cw.upper);
      CHECK(cw.rho == doctest::Approx(power_oracle(h)).epsilon(1e-8));
    }
  }

  TEST_CASE("Kesten ratios") {
    PositiveMatrix g{{2, 1}, {1, 2}};
    CHECK(kesten_ratio(g, false) == doctest::Approx(2.0));
    CHECK(kesten_ratio(g, true) == doctest::Approx(2.0));
    PositiveMatrix h{{10, 1}, {10, 1}};
    CHECK(kesten_ratio(h, true) == doctest::Approx(1.0));
    CHECK(kesten_ratio(h, false) == doctest::Approx(10.0));
  }
}
