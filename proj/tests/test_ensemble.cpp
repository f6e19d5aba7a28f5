// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include "conelab/ensemble.hpp"
#include "conelab/errors.hpp"
#include "doctest.h"

using namespace conelab;

TEST_SUITE("ensemble") {
  TEST_CASE("valid ensembles") {
    PositiveMatrix M{{2, 1}, {1, 2}};
    auto point = build_finite({M}, {1.0});
    CHECK(point.size() == 1);
    auto two = build_finite({M, M.scaled(2.0)}, {0.5, 0.5});
    CHECK(two.size() == 2);
    CHECK_THROWS_AS(build_finite(2, {{1, 0, 1, 1}}, {1.0}), Error);
    CHECK_THROWS_AS(build_finite({M, M}, {0.5, 0.6}), Error);
    try {
      build_finite({M, M}, {0.5, 0.6});
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BadProbabilityVector);
    }
  }

  TEST_CASE("conditions of a point mass") {
    auto point = build_finite({PositiveMatrix{{2, 1}, {1, 2}}}, {1.0});
    auto rep = check_conditions(point);
    CHECK(rep.c_full == doctest::Approx(2.0));
    CHECK(rep.c_col == doctest::Approx(2.0));
    CHECK(rep.epsilon == doctest::Approx(0.25));
    CHECK_FALSE(rep.nonarithmetic_heuristic);
    CHECK(rep.a1);
    CHECK(rep.a2);
  }

  TEST_CASE("nonarithmetic heuristic") {
    PositiveMatrix M{{2, 1}, {1, 2}};
    auto ens = build_finite({M, PositiveMatrix{{1, 1}, {1, 1}}.scaled(std::numbers::e)}, {0.5, 0.5});
    auto rep = check_conditions(ens);
    CHECK(rep.nonarithmetic_heuristic);
    CHECK(rep.epsilon > 0.0);
    CHECK(rep.epsilon < 1.0);
  }

  TEST_CASE("sampling frequency and determinism") {
    PositiveMatrix M{{2, 1}, {1, 2}};
    auto ens = build_finite({M, M.scaled(2.0)}, {0.5, 0.5});
    RandomStream a(7), b(7);
    const int N = 100000;
    int zeros = 0;
    for (int i = 0; i < N; ++i) {
      const size_t ia = ens.sample_index(a);
      CHECK(ia == ens.sample_index(b));
      zeros += ia == 0;
    }
    const double sigma = std::sqrt(0.25 / N);
    CHECK(std::abs(zeros / double(N) - 0.5) < 3 * sigma);
    auto point = build_finite({M}, {1.0});
    RandomStream c(1);
    for (int i = 0; i < 100; ++i) CHECK(point.sample_index(c) == 0);
  }

  TEST_CASE("scalar reference closed forms") {
    auto ref = scalar_reference(PositiveMatrix{{2, 1}, {1, 2}}, {{1.0, 0.5}, {2.0, 0.5}});
    CHECK(ref.Lambda(0.0) == doctest::Approx(0.0));
    CHECK(ref.Lambda(1.0) == doctest::Approx(std::log(4.5)));
    CHECK(ref.lambda1() == doctest::Approx(std::log(3.0) + 0.5 * std::log(2.0)));
    CHECK(ref.lambda1() == doctest::Approx(1.44518).epsilon(1e-5));
    CHECK(ref.sigma2() == doctest::Approx(std::log(2.0) * std::log(2.0) / 4));
    CHECK(std::abs(ref.m3()) < 1e-12);
    // numerical derivative oracle
    const double h = 1e-4;
    CHECK(ref.Lambda_derivative(0.7, 1) == doctest::Approx((ref.Lambda(0.7 + h) - ref.Lambda(0.7 - h)) / (2 * h)));
    auto det = scalar_reference(PositiveMatrix{{2, 1}, {1, 2}}, {{1.0, 1.0}});
    CHECK(det.Lambda(0.8) == doctest::Approx(0.8 * std::log(3.0)));
    CHECK(std::abs(det.sigma2()) < 1e-14);
  }

  TEST_CASE("json schema") {
    nlohmann::json doc = {{"dim", 2}, {"atoms", {{{2, 1}, {1, 2}}}}};
    try {
      ensemble_from_json(doc);
      FAIL("expected schema violation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SchemaViolation);
      CHECK(std::string(e.what()).find("probs") != std::string::npos);
    }
    doc["probs"] = {1.0};
    doc["colour"] = "blue";
    std::vector<std::string> warnings;
    auto ens = ensemble_from_json(doc, &warnings);
    CHECK(ens.size() == 1);
    CHECK(warnings.size() == 1);
    auto back = ensemble_from_json(ensemble_to_json(ens));
    CHECK(ensemble_hash(back) == ensemble_hash(ens));
  }
}
