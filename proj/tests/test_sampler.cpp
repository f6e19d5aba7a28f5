// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include "conelab/rate_function.hpp"
#include "conelab/sampler.hpp"
#include "conelab/stats.hpp"
#include "doctest.h"

using namespace conelab;

namespace {

FiniteEnsemble scalar12() { return scalar_ensemble(PositiveMatrix{{2, 1}, {1, 2}}, {{1.0, 0.5}, {2.0, 0.5}}); }

double mean(const std::vector<double>& x) { return mean_se(x).mean; }
double stderr_of_mean(const std::vector<double>& x) { return mean_se(x).se; }

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("point mass in the Perron direction") {
    auto point = build_finite({PositiveMatrix{{2, 1}, {1, 2}}}, {1.0});
    const std::vector<double> v{0.5, 0.5}, f{1.0, 0.0};
    auto b = simulate_paths(point, v, f, 50, 10, RandomStream(1));
    for (double x : b.log_vecnorm) CHECK(x == doctest::Approx(50 * std::log(3.0)).epsilon(1e-12));
    for (double x : b.log_specrad) CHECK(x == doctest::Approx(50 * std::log(3.0)).epsilon(1e-9));
  }

  TEST_CASE("coefficient with f = 1 is the norm") {
    auto ens = scalar12();
    const std::vector<double> v{0.2, 0.8}, one{1.0, 1.0};
    auto b = simulate_paths(ens, v, one, 40, 1000, RandomStream(2));
    for (size_t i = 0; i < b.count; ++i) CHECK(b.log_coeff[i] == doctest::Approx(b.log_vecnorm[i]).epsilon(1e-13));
  }

  TEST_CASE("law of large numbers") {
    auto ens = scalar12();
    const std::vector<double> v{1.0, 0.0};
    const int n = 400;
    auto b = simulate_paths(ens, v, v, n, 10000, RandomStream(3));
    std::vector<double> x;
    for (double l : b.log_vecnorm) x.push_back(l / n);
    const double lambda = std::log(3.0) + 0.5 * std::log(2.0);
    CHECK(std::abs(mean(x) - lambda) < 3 * stderr_of_mean(x));
  }

  TEST_CASE("determinism across runs") {
    auto ens = scalar12();
    const std::vector<double> v{0.3, 0.7};
    auto a = simulate_paths(ens, v, v, 64, 5000, RandomStream(11));
    auto b = simulate_paths(ens, v, v, 64, 5000, RandomStream(11));
    CHECK(a.log_coeff == b.log_coeff);
    CHECK(a.log_matnorm == b.log_matnorm);
  }

  TEST_CASE("untilted chain has unit weights") {
    auto ens = build_finite({PositiveMatrix{{4, 1}, {1, 1}}, PositiveMatrix{{0.5, 1}, {0.5, 1.5}}}, {0.5, 0.5});
    auto sol = solve_spectral(ens, 0.0, build_adapted_grid(ens, 32));
    const std::vector<double> v{0.5, 0.5};
    auto t = tilted_simulate(ens, sol, TiltMode::Norm, v, v, 30, 2000, RandomStream(4));
    auto u = simulate_paths(ens, v, v, 30, 2000, RandomStream(4));
    for (size_t i = 0; i < t.count; ++i) {
      CHECK(std::abs(t.log_weight[i]) < 1e-12);
      CHECK(std::abs(t.log_weight_theory[i]) < 1e-9);
    }
    CHECK(std::abs(mean(t.log_vecnorm) - mean(u.log_vecnorm)) < 4 * stderr_of_mean(u.log_vecnorm));
  }

  TEST_CASE("tilted law of large numbers") {
    auto ens = scalar12();
    auto sol = solve_spectral(ens, 0.5, build_adapted_grid(ens, 64));
    const std::vector<double> v{0.5, 0.5};
    const int n = 400;
    auto t = tilted_simulate(ens, sol, TiltMode::Norm, v, v, n, 10000, RandomStream(5));
    std::vector<double> x;
    for (double l : t.log_vecnorm) x.push_back(l / n);
    const double target = std::log(3.0) + std::log(2.0) * std::sqrt(2.0) / (1 + std::sqrt(2.0));
    CHECK(std::abs(mean(x) - target) < 3 * stderr_of_mean(x));
    for (size_t i = 0; i < t.count; ++i)
      CHECK(t.log_weight[i] == doctest::Approx(t.log_weight_theory[i]).epsilon(1e-8));
  }

  TEST_CASE("IS estimate at the centre") {
    auto ens = scalar_ensemble(PositiveMatrix{{2, 1}, {1, 2}}, {{1.0, 1.0 / 3}, {2.0, 1.0 / 3}, {3.0, 1.0 / 3}});
    auto sol = solve_spectral(ens, 1e-3, build_adapted_grid(ens, 32));
    const std::vector<double> v{0.5, 0.5};
    const int n = 400;
    auto t = tilted_simulate(ens, sol, TiltMode::Norm, v, v, n, 20000, RandomStream(6));
    const double lambda = std::log(3.0) + std::log(6.0) / 3;
    auto est = is_probability(t, n * lambda, Tail::Upper, Observable::VectorNorm);
    CHECK(est.estimate == doctest::Approx(0.5).epsilon(0.05));
  }

  TEST_CASE("point-mass drifts") {
    auto point = build_finite({PositiveMatrix{{2, 1}, {1, 2}}}, {1.0});
    const std::vector<double> f{1.0, 0.0};
    for (auto v : {std::vector<double>{0.5, 0.5}, std::vector<double>{0.9, 0.1}}) {
      auto d = estimate_drifts(point, f, v, std::log(3.0), 60, 2000, RandomStream(7));
      CHECK(std::abs(d.b_v.value) < 1e-9);
      CHECK(d.d_f.value == doctest::Approx(std::log(0.5)).epsilon(1e-9));
    }
  }

  TEST_CASE("characteristic function diagnostic") {
    auto point = build_finite({PositiveMatrix{{2, 1}, {1, 2}}}, {1.0});
    const std::vector<double> v{0.5, 0.5};
    auto a = simulate_paths(point, v, v, 20, 100, RandomStream(8));
    auto b = simulate_paths(point, v, v, 40, 100, RandomStream(9));
    const std::vector<double> t{0.0, 2 * std::numbers::pi / std::log(3.0)};
    for (const auto& row : characteristic_decay_diagnostic({&a, &b}, t))
      CHECK(row.modulus == doctest::Approx(1.0).epsilon(1e-9));
  }
}
