// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "conelab/transfer_operator.hpp"
#include "doctest.h"

using namespace conelab;

namespace {

FiniteEnsemble scalar12() { return scalar_ensemble(PositiveMatrix{{2, 1}, {1, 2}}, {{1.0, 0.5}, {2.0, 0.5}}); }

FiniteEnsemble two_atom() {
  return build_finite({PositiveMatrix{{4, 1}, {1, 1}}, PositiveMatrix{{0.5, 1}, {0.5, 1.5}}}, {0.5, 0.5});
}

}  // namespace

TEST_SUITE("transfer-operator") {
  TEST_CASE("uniform grids") {
    auto g = build_grid(2, 4);
    REQUIRE(g.size() == 5);
    const double expect[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (size_t i = 0; i < 5; ++i) {
      CHECK(g.node(i)[0] + g.node(i)[1] == doctest::Approx(1.0));
      bool found = false;
      for (double e : expect) found = found || std::abs(g.node(i)[0] - e) < 1e-15;
      CHECK(found);
    }
    std::vector<double> vals;
    for (size_t i = 0; i < g.size(); ++i) vals.push_back(g.node(i)[0]);
    CHECK(g.interpolate(vals, std::vector<double>{0.3, 0.7}) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(build_grid(3, 8).size() == 45);
  }

  TEST_CASE("Chebyshev interpolation is exact for polynomials") {
    auto g = build_chebyshev_grid(16, 0.2, 0.8);
    std::vector<double> vals;
    for (size_t i = 0; i < g.size(); ++i) vals.push_back(std::pow(g.t[i], 5) - g.t[i]);
    const double t = 0.4321;
    CHECK(g.interpolate(vals, std::vector<double>{t, 1 - t}) == doctest::Approx(std::pow(t, 5) - t).epsilon(1e-12));
  }

  TEST_CASE("apply_Ps") {
    auto ens = two_atom();
    auto grid = build_adapted_grid(ens, 32);
    std::vector<double> one(grid.size(), 1.0);
    for (double x : apply_Ps(ens, 0.0, grid, one)) CHECK(x == doctest::Approx(1.0).epsilon(1e-14));
    auto out = apply_Ps(ens, 1.0, grid, one);
    for (size_t i = 0; i < grid.size(); ++i) {
      const auto v = grid.node(i);
      double hand = 0.0;
      for (size_t k = 0; k < ens.size(); ++k) {
        std::vector<double> y(2);
        ens.atoms[k].apply(v, y);
        hand += ens.probs[k] * (y[0] + y[1]);
      }
      CHECK(out[i] == doctest::Approx(hand).epsilon(1e-13));
    }
    auto point = build_finite({PositiveMatrix{{2, 1}, {1, 2}}}, {1.0});
    auto lin = build_grid(2, 4);
    auto p1 = apply_Ps(point, 1.0, lin, std::vector<double>(lin.size(), 1.0));
    for (size_t i = 0; i < lin.size(); ++i)
      if (std::abs(lin.node(i)[0] - 0.5) < 1e-15) CHECK(p1[i] == doctest::Approx(3.0));
  }

  TEST_CASE("spectral solutions") {
    auto point = build_finite({PositiveMatrix{{2, 1}, {1, 2}}}, {1.0});
    auto pg = build_adapted_grid(point, 32);
    auto p1 = solve_spectral(point, 1.0, pg);
    CHECK(p1.kappa == doctest::Approx(3.0).epsilon(1e-10));
    std::vector<double> coord;
    for (size_t i = 0; i < pg.size(); ++i) coord.push_back(pg.node(i)[0]);
    CHECK(stationary_pi(p1, coord) == doctest::Approx(0.5).epsilon(1e-8));

    auto ens = scalar12();
    auto grid = build_adapted_grid(ens, 64);
    auto sol = solve_spectral(ens, 1.0, grid);
    CHECK(sol.kappa == doctest::Approx(4.5).epsilon(1e-10));
    CHECK(sol.residual < 1e-8);
    const std::vector<double> one{1.0, 1.0};
    CHECK(sol.r(one) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sol.r_star(one) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(stationary_pi(sol, std::vector<double>(grid.size(), 1.0)) == doctest::Approx(1.0));

    auto zero = solve_spectral(two_atom(), 0.0, build_adapted_grid(two_atom(), 32));
    CHECK(zero.kappa == doctest::Approx(1.0).epsilon(1e-12));
    for (double r : zero.r_s) CHECK(r == doctest::Approx(1.0).epsilon(1e-10));
  }

  TEST_CASE("coefficient eigendata") {
    auto ens = two_atom();
    auto grid = build_adapted_grid(ens, 64);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.05, 1.0);
    for (double s : {-0.5, 0.5}) {
      auto sol = solve_spectral(ens, s, grid);
      auto ones = coefficient_eigendata(sol, std::vector<double>{1.0, 1.0});
      for (size_t i = 0; i < grid.size(); ++i) CHECK(ones.r_sf[i] == doctest::Approx(sol.r_s[i]).epsilon(1e-12));
      for (int k = 0; k < 5; ++k) {
        std::vector<double> f{U(rng), U(rng)};
        auto ed = coefficient_eigendata(sol, f);
        CHECK(ed.nu_of_r == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(ed.residual < 1e-8);
      }
    }
  }

  TEST_CASE("tilted kernels") {
    auto ens = two_atom();
    auto grid = build_adapted_grid(ens, 64);
    auto sol0 = solve_spectral(ens, 0.0, grid);
    auto sol = solve_spectral(ens, 0.5, grid);
    for (double t : {0.1, 0.4, 0.9}) {
      std::vector<double> v{t, 1 - t};
      auto k0 = markov_kernel_qs(sol0, v);
      for (size_t i = 0; i < k0.size(); ++i) {
        CHECK(k0[i].prob == doctest::Approx(ens.probs[static_cast<size_t>(k0[i].atom)]).epsilon(1e-10));
        CHECK(k0[i].correction == doctest::Approx(1.0).epsilon(1e-10));
      }
      double sum = 0.0;
      for (const auto& k : markov_kernel_qs(sol, v)) sum += k.prob;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
      sum = 0.0;
      for (const auto& k : markov_kernel_qsf(sol, std::vector<double>{0.3, 0.7}, v)) sum += k.prob;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
    }
    auto point = build_finite({PositiveMatrix{{2, 1}, {1, 2}}}, {1.0});
    auto ps = solve_spectral(point, 0.5, build_adapted_grid(point, 16));
    auto kp = markov_kernel_qs(ps, std::vector<double>{0.3, 0.7});
    REQUIRE(kp.size() == 1);
    CHECK(kp[0].prob == 1.0);
  }

  TEST_CASE("perturbed eigenvalue") {
    auto ens = scalar12();
    auto grid = build_adapted_grid(ens, 64);
    CHECK(perturbed_eigenvalue_check(ens, grid, 0.5, 0.0).discrepancy < 1e-12);
    CHECK(perturbed_eigenvalue_check(ens, grid, 0.5, 0.25).discrepancy < 1e-6);
  }
}
