// SPDX-License-Identifier: Apache-2.0
#include "conelab/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "conelab/errors.hpp"

namespace conelab {

namespace {

constexpr double kProbTol = 1e-12;

void validate_probs(const std::vector<double>& probs, size_t n_atoms) {
  if (probs.size() != n_atoms) {
    throw Error(ErrorCode::BadProbabilityVector,
                "expected " + std::to_string(n_atoms) + " probabilities, got " + std::to_string(probs.size()));
  }
  if (probs.empty()) throw Error(ErrorCode::BadProbabilityVector, "ensemble needs at least one atom");
  double s = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || !(p > 0.0)) throw Error(ErrorCode::BadProbabilityVector, "probabilities must be > 0");
    s += p;
  }
  if (std::abs(s - 1.0) > kProbTol) throw Error(ErrorCode::BadProbabilityVector, "probabilities must sum to 1");
}

// Central moments of the tilted law of log c.
struct Tilted {
  double mean = 0.0;
  double mu[6] = {0, 0, 0, 0, 0, 0};
};

Tilted tilt(const std::vector<std::pair<double, double>>& sc, double s) {
  double lmax = -INFINITY;
  for (auto [c, p] : sc) lmax = std::max(lmax, s * std::log(c));
  std::vector<double> w;
  double z = 0.0;
  for (auto [c, p] : sc) {
    w.push_back(p * std::exp(s * std::log(c) - lmax));
    z += w.back();
  }
  Tilted t;
  for (size_t i = 0; i < sc.size(); ++i) t.mean += w[i] / z * std::log(sc[i].first);
  for (size_t i = 0; i < sc.size(); ++i) {
    const double x = std::log(sc[i].first) - t.mean;
    double xp = 1.0;
    for (int k = 0; k < 6; ++k) {
      t.mu[k] += w[i] / z * xp;
      xp *= x;
    }
  }
  return t;
}

}  // namespace

double ScalarReference::Lambda(double s) const {
  double z = 0.0;
  for (auto [c, p] : scalars) z += p * std::pow(c, s);
  return std::log(z) + s * std::log(rho_base);
}

double ScalarReference::Lambda_derivative(double s, int k) const {
  const Tilted t = tilt(scalars, s);
  switch (k) {
    case 1: return t.mean + std::log(rho_base);
    case 2: return t.mu[2];
    case 3: return t.mu[3];
    case 4: return t.mu[4] - 3.0 * t.mu[2] * t.mu[2];
    case 5: return t.mu[5] - 10.0 * t.mu[3] * t.mu[2];
    default: throw Error(ErrorCode::InvalidArgument, "derivative order must be in 1..5");
  }
}

size_t FiniteEnsemble::sample_index(RandomStream& stream) const {
  if (atoms.size() == 1) return 0;
  const double u = stream.uniform();
  for (size_t i = 0; i + 1 < cumulative.size(); ++i)
    if (u < cumulative[i]) return i;
  return cumulative.size() - 1;
}

FiniteEnsemble build_finite(std::vector<PositiveMatrix> atoms, std::vector<double> probs) {
  if (atoms.empty()) throw Error(ErrorCode::BadProbabilityVector, "ensemble needs at least one atom");
  validate_probs(probs, atoms.size());
  const int d = atoms.front().dim();
  if (d < 2) throw Error(ErrorCode::UnsupportedDimension, "dimension must be at least 2");
  for (const auto& a : atoms)
    if (a.dim() != d) throw Error(ErrorCode::DimensionMismatch, "atoms have different dimensions");
  FiniteEnsemble e;
  e.dim = d;
  e.atoms = std::move(atoms);
  e.probs = std::move(probs);
  e.cumulative.resize(e.probs.size());
  std::partial_sum(e.probs.begin(), e.probs.end(), e.cumulative.begin());
  e.cumulative.back() = 1.0;
  return e;
}

FiniteEnsemble build_finite(int dim, const std::vector<std::vector<double>>& atoms, const std::vector<double>& probs) {
  std::vector<PositiveMatrix> m;
  m.reserve(atoms.size());
  for (const auto& a : atoms) {
    if (a.size() != static_cast<size_t>(dim) * static_cast<size_t>(dim))
      throw Error(ErrorCode::DimensionMismatch,
                  "atom has " + std::to_string(a.size()) + " entries, expected " + std::to_string(dim * dim));
    m.emplace_back(dim, a);
  }
  return build_finite(std::move(m), probs);
}

ScalarReference scalar_reference(const PositiveMatrix& M, const std::vector<std::pair<double, double>>& scalars) {
  std::vector<double> p;
  for (auto [c, q] : scalars) {
    if (!std::isfinite(c) || !(c > 0.0)) throw Error(ErrorCode::NonpositiveEntry, "scalar factors must be > 0");
    p.push_back(q);
  }
  validate_probs(p, scalars.size());
  return ScalarReference{M, scalars, spectral_radius_cw(M, 1e-14)};
}

FiniteEnsemble scalar_ensemble(const PositiveMatrix& M, const std::vector<std::pair<double, double>>& scalars) {
  ScalarReference ref = scalar_reference(M, scalars);
  std::vector<PositiveMatrix> atoms;
  std::vector<double> probs;
  for (auto [c, p] : scalars) {
    atoms.push_back(M.scaled(c));
    probs.push_back(p);
  }
  FiniteEnsemble e = build_finite(std::move(atoms), std::move(probs));
  e.scalar = std::move(ref);
  return e;
}

ConditionReport check_conditions(const FiniteEnsemble& ens) {
  ConditionReport r;
  for (const auto& g : ens.atoms) {
    r.c_full = std::max(r.c_full, kesten_ratio(g, false));
    r.c_col = std::max(r.c_col, kesten_ratio(g, true));
  }
  r.a1 = std::isfinite(r.c_full);
  r.a2 = std::isfinite(r.c_col);
  r.epsilon = 1.0 / (r.c_col * ens.dim);

  std::vector<double> logrho;
  for (const auto& g : ens.atoms) logrho.push_back(std::log(spectral_radius_cw(g, 1e-14)));
  double best_distance = -1.0;
  for (size_t i = 0; i < logrho.size(); ++i) {
    for (size_t j = 0; j < logrho.size(); ++j) {
      if (i == j || std::abs(logrho[j]) < 1e-300) continue;
      const double x = logrho[i] / logrho[j];
      double dist = INFINITY;
      long bp = 0, bq = 1;
      for (long q = 1; q <= 64; ++q) {
        const long p = std::lround(x * static_cast<double>(q));
        const double dd = std::abs(x - static_cast<double>(p) / static_cast<double>(q));
        if (dd < dist) {
          dist = dd;
          bp = p;
          bq = q;
        }
      }
      if (dist > best_distance) {
        best_distance = dist;
        r.witness_i = static_cast<int>(i);
        r.witness_j = static_cast<int>(j);
        r.witness_ratio = x;
        r.witness_p = bp;
        r.witness_q = bq;
        r.witness_distance = dist;
      }
    }
  }
  r.nonarithmetic_heuristic = best_distance > 1e-9;
  return r;
}

FiniteEnsemble ensemble_from_json(const nlohmann::json& doc, std::vector<std::string>* warnings) {
  using nlohmann::json;
  if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "ensemble document must be a JSON object");

  auto number = [](const json& x, const std::string& path) {
    if (!x.is_number()) throw Error(ErrorCode::SchemaViolation, path + ": expected a number");
    const double v = x.get<double>();
    if (!std::isfinite(v)) throw Error(ErrorCode::SchemaViolation, path + ": NaN or Inf is not allowed");
    return v;
  };
  auto number_list = [&](const json& x, const std::string& path) {
    if (!x.is_array()) throw Error(ErrorCode::SchemaViolation, path + ": expected an array");
    std::vector<double> out;
    for (size_t i = 0; i < x.size(); ++i) out.push_back(number(x[i], path + "[" + std::to_string(i) + "]"));
    return out;
  };
  // Accepts a flat row-major list or a list of rows.
  auto matrix = [&](const json& x, const std::string& path) {
    if (!x.is_array()) throw Error(ErrorCode::SchemaViolation, path + ": expected an array");
    std::vector<double> out;
    for (size_t i = 0; i < x.size(); ++i) {
      if (x[i].is_array()) {
        auto row = number_list(x[i], path + "[" + std::to_string(i) + "]");
        out.insert(out.end(), row.begin(), row.end());
      } else {
        out.push_back(number(x[i], path + "[" + std::to_string(i) + "]"));
      }
    }
    return out;
  };

  if (warnings) {
    static const std::set<std::string> known = {"dim", "atoms", "probs", "scalar_reference"};
    for (auto it = doc.begin(); it != doc.end(); ++it)
      if (!known.count(it.key())) warnings->push_back("unknown key '" + it.key() + "' ignored");
  }

  if (!doc.contains("dim")) throw Error(ErrorCode::SchemaViolation, "missing required field \"dim\"");
  if (!doc["dim"].is_number_integer()) throw Error(ErrorCode::SchemaViolation, "dim: expected an integer");
  const int dim = doc["dim"].get<int>();
  if (dim < 2) throw Error(ErrorCode::UnsupportedDimension, "dim must be at least 2");

  std::optional<ScalarReference> ref;
  if (doc.contains("scalar_reference")) {
    const json& sr = doc["scalar_reference"];
    if (!sr.is_object()) throw Error(ErrorCode::SchemaViolation, "scalar_reference: expected an object");
    if (!sr.contains("base")) throw Error(ErrorCode::SchemaViolation, "missing required field \"scalar_reference.base\"");
    if (!sr.contains("scalars"))
      throw Error(ErrorCode::SchemaViolation, "missing required field \"scalar_reference.scalars\"");
    const auto base = matrix(sr["base"], "scalar_reference.base");
    if (base.size() != static_cast<size_t>(dim * dim))
      throw Error(ErrorCode::DimensionMismatch, "scalar_reference.base does not match dim");
    std::vector<std::pair<double, double>> pairs;
    const json& s = sr["scalars"];
    if (!s.is_array()) throw Error(ErrorCode::SchemaViolation, "scalar_reference.scalars: expected an array");
    for (size_t i = 0; i < s.size(); ++i) {
      auto cp = number_list(s[i], "scalar_reference.scalars[" + std::to_string(i) + "]");
      if (cp.size() != 2)
        throw Error(ErrorCode::SchemaViolation, "scalar_reference.scalars[" + std::to_string(i) + "]: expected [c, p]");
      pairs.emplace_back(cp[0], cp[1]);
    }
    ref = scalar_reference(PositiveMatrix(dim, base), pairs);
  }

  FiniteEnsemble ens;
  if (!doc.contains("atoms") && ref) {
    ens = scalar_ensemble(ref->base, ref->scalars);
  } else {
    if (!doc.contains("atoms")) throw Error(ErrorCode::SchemaViolation, "missing required field \"atoms\"");
    if (!doc.contains("probs")) throw Error(ErrorCode::SchemaViolation, "missing required field \"probs\"");
    const json& a = doc["atoms"];
    if (!a.is_array()) throw Error(ErrorCode::SchemaViolation, "atoms: expected an array");
    std::vector<std::vector<double>> atoms;
    for (size_t i = 0; i < a.size(); ++i) atoms.push_back(matrix(a[i], "atoms[" + std::to_string(i) + "]"));
    ens = build_finite(dim, atoms, number_list(doc["probs"], "probs"));
    if (ref) {
      if (ref->scalars.size() != ens.size())
        throw Error(ErrorCode::SchemaViolation, "scalar_reference does not match atoms");
      for (size_t i = 0; i < ens.size(); ++i) {
        const double c = ref->scalars[i].first;
        for (int k = 0; k < dim * dim; ++k) {
          const double want = c * ref->base.entries()[static_cast<size_t>(k)];
          if (std::abs(ens.atoms[i].entries()[static_cast<size_t>(k)] - want) > 1e-12 * want)
            throw Error(ErrorCode::SchemaViolation, "atoms[" + std::to_string(i) + "] is not c*base");
        }
        if (std::abs(ens.probs[i] - ref->scalars[i].second) > 1e-12)
          throw Error(ErrorCode::SchemaViolation, "probs[" + std::to_string(i) + "] differs from scalar_reference");
      }
      ens.scalar = ref;
    }
  }
  return ens;
}

nlohmann::json ensemble_to_json(const FiniteEnsemble& ens) {
  nlohmann::json doc;
  doc["dim"] = ens.dim;
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& g : ens.atoms) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < g.dim(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int j = 0; j < g.dim(); ++j) row.push_back(g(i, j));
      rows.push_back(row);
    }
    atoms.push_back(rows);
  }
  doc["atoms"] = atoms;
  doc["probs"] = ens.probs;
  if (ens.scalar) {
    nlohmann::json base = nlohmann::json::array();
    for (int i = 0; i < ens.dim; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int j = 0; j < ens.dim; ++j) row.push_back(ens.scalar->base(i, j));
      base.push_back(row);
    }
    nlohmann::json sc = nlohmann::json::array();
    for (auto [c, p] : ens.scalar->scalars) sc.push_back({c, p});
    doc["scalar_reference"] = {{"base", base}, {"scalars", sc}};
  }
  return doc;
}

std::string ensemble_hash(const FiniteEnsemble& ens) {
  nlohmann::json doc = ensemble_to_json(ens);
  doc.erase("scalar_reference");
  const std::string text = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace conelab
