// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "conelab/cone_geometry.hpp"
#include "conelab/random_stream.hpp"
#include "json.hpp"

namespace conelab {

// i.i.d. products of c_k * M with scalar c_k > 0; log||G_n v|| = sum log c_k + log||M^n v||.
struct ScalarReference {
  PositiveMatrix base;
  std::vector<std::pair<double, double>> scalars;  // (c, p)
  double rho_base;

  double Lambda(double s) const;
  // k-th derivative of Lambda, k in 1..5.
  double Lambda_derivative(double s, int k) const;
  double lambda1() const { return Lambda_derivative(0.0, 1); }
  double sigma2() const { return Lambda_derivative(0.0, 2); }
  double m3() const { return Lambda_derivative(0.0, 3); }
};

struct FiniteEnsemble {
  int dim = 0;
  std::vector<PositiveMatrix> atoms;
  std::vector<double> probs;
  std::vector<double> cumulative;
  std::optional<ScalarReference> scalar;

  size_t size() const { return atoms.size(); }
  size_t sample_index(RandomStream& stream) const;
  const PositiveMatrix& sample_matrix(RandomStream& stream) const { return atoms[sample_index(stream)]; }
};

FiniteEnsemble build_finite(int dim, const std::vector<std::vector<double>>& atoms, const std::vector<double>& probs);
FiniteEnsemble build_finite(std::vector<PositiveMatrix> atoms, std::vector<double> probs);

ScalarReference scalar_reference(const PositiveMatrix& M, const std::vector<std::pair<double, double>>& scalars);
// Ensemble with atoms c_i * M carrying its closed forms.
FiniteEnsemble scalar_ensemble(const PositiveMatrix& M, const std::vector<std::pair<double, double>>& scalars);

struct ConditionReport {
  double c_full = 1.0;
  double c_col = 1.0;
  double epsilon = 0.5;
  bool a1 = true;
  bool a2 = true;
  bool nonarithmetic_heuristic = false;
  // Witness pair for the heuristic: atoms i, j, ratio log rho_i / log rho_j and its closest p/q.
  int witness_i = -1;
  int witness_j = -1;
  double witness_ratio = 0.0;
  long witness_p = 0;
  long witness_q = 0;
  double witness_distance = 0.0;
  bool moment_log3 = true;
  bool moment_exp = true;
};

ConditionReport check_conditions(const FiniteEnsemble& ens);

// JSON document: {"dim", "atoms", "probs", optional "scalar_reference": {"base", "scalars"}}.
// Unknown keys are appended to `warnings` when given.
FiniteEnsemble ensemble_from_json(const nlohmann::json& doc, std::vector<std::string>* warnings = nullptr);
nlohmann::json ensemble_to_json(const FiniteEnsemble& ens);
// Hex FNV-1a hash of the canonical JSON form.
std::string ensemble_hash(const FiniteEnsemble& ens);

}  // namespace conelab
