// SPDX-License-Identifier: Apache-2.0
#include "conelab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "conelab/errors.hpp"
#include "conelab/stats.hpp"

namespace conelab {

using nlohmann::json;

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

[[noreturn]] void schema(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::SchemaViolation, "$." + field + ": " + what);
}

double number(const json& j, const std::string& field) {
  if (!j.is_number()) schema(field, "expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) schema(field, "must be finite");
  return x;
}

long long integer(const json& j, const std::string& field) {
  if (!j.is_number_integer()) schema(field, "expected an integer");
  return j.get<long long>();
}

std::vector<double> vector_field(const json& j, const std::string& field) {
  if (!j.is_array()) schema(field, "expected an array");
  std::vector<double> out;
  for (size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<double> ones(int d) { return std::vector<double>(static_cast<size_t>(d), 1.0); }

std::vector<double> unit(int d, int i) {
  std::vector<double> e(static_cast<size_t>(d), 0.0);
  e[static_cast<size_t>(i)] = 1.0;
  return e;
}

const char* tail_name(Tail t) { return t == Tail::Upper ? "upper" : "lower"; }

ComparisonReport new_report(const std::string& name, const std::string& command, const Model& m,
                            const RunConfig& cfg) {
  ComparisonReport r;
  r.name = name;
  r.command = command;
  r.ensemble_hash = m.hash;
  r.seed = cfg.seed;
  return r;
}

void add_check(CommandResult& res, const std::string& name, bool passed, const std::string& detail) {
  res.checks.push_back({name, passed, detail});
  if (!passed) res.exit_code = std::max(res.exit_code, 1);
}

std::string observable_label(Observable o) { return observable_name(o); }

std::vector<double> sorted_standardized(const std::vector<double>& x, double center, double scale) {
  std::vector<double> z(x.size());
  for (size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - center) / scale;
  std::sort(z.begin(), z.end());
  return z;
}

bool has(const std::vector<Observable>& obs, Observable o) { return std::find(obs.begin(), obs.end(), o) != obs.end(); }

// log M^n v / log ||M^n|| tracked with renormalization.
double scalar_base_offset(const PositiveMatrix& M, Observable obs, std::span<const double> f,
                          std::span<const double> v, int n) {
  const int d = M.dim();
  const auto du = static_cast<size_t>(d);
  if (obs == Observable::MatrixNorm || obs == Observable::Entry11 || obs == Observable::SpectralRadius) {
    std::vector<double> P(du * du, 0.0), T(du * du);
    for (size_t i = 0; i < du; ++i) P[i * du + i] = 1.0;
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      for (size_t i = 0; i < du; ++i)
        for (size_t j = 0; j < du; ++j) {
          double t = 0.0;
          for (size_t l = 0; l < du; ++l) t += M.entries()[i * du + l] * P[l * du + j];
          T[i * du + j] = t;
        }
      double s = 0.0;
      for (double x : T) s += x;
      for (size_t i = 0; i < T.size(); ++i) P[i] = T[i] / s;
      acc += std::log(s);
    }
    if (obs == Observable::MatrixNorm) return acc;
    if (obs == Observable::Entry11) return acc + std::log(P[0]);
    return acc + std::log(collatz_wielandt(P, d, 1e-14).rho);
  }
  std::vector<double> u(v.begin(), v.end()), y(du);
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    M.apply(u, y);
    const double s = l1_norm(y);
    acc += std::log(s);
    for (size_t i = 0; i < du; ++i) u[i] = y[i] / s;
  }
  if (obs == Observable::VectorNorm) return acc + std::log(l1_norm(u));
  return acc + std::log(dot(f, u));
}

std::vector<double> scalar_endpoint(const PositiveMatrix& M, std::span<const double> v, int n) {
  std::vector<double> u(v.begin(), v.end()), y(u.size());
  const double s0 = l1_norm(u);
  for (double& x : u) x /= s0;
  for (int k = 0; k < n; ++k) {
    M.apply(u, y);
    const double s = l1_norm(y);
    for (size_t i = 0; i < u.size(); ++i) u[i] = y[i] / s;
  }
  return u;
}

bool exact_oracle_available(const FiniteEnsemble& ens) { return ens.scalar && ens.scalar->scalars.size() <= 3; }

}  // namespace

// ---------------------------------------------------------------------------------------------
// test functions

double PhiSpec::operator()(std::span<const double> u) const {
  switch (kind) {
    case Kind::Const1: return 1.0;
    case Kind::Coord: return u[static_cast<size_t>(coord)] / l1_norm(u);
    case Kind::Bump: return std::max(0.0, 1.0 - hilbert_distance(u, center) / radius);
  }
  return 0.0;
}

std::string PhiSpec::name() const {
  switch (kind) {
    case Kind::Const1: return "const1";
    case Kind::Coord: return "coord_" + std::to_string(coord + 1);
    case Kind::Bump: return "bump";
  }
  return "?";
}

PhiSpec parse_phi(const json& j, int dim) {
  PhiSpec phi;
  std::string kind;
  if (j.is_string()) {
    kind = j.get<std::string>();
  } else if (j.is_object()) {
    if (!j.contains("kind") || !j["kind"].is_string()) schema("phi.kind", "missing");
    kind = j["kind"].get<std::string>();
  } else {
    schema("phi", "expected a string or an object");
  }
  if (kind == "const1") return phi;
  if (kind.rfind("coord", 0) == 0) {
    phi.kind = PhiSpec::Kind::Coord;
    long long idx = 1;
    if (kind.size() > 6 && kind[5] == '_') {
      try {
        idx = std::stoll(kind.substr(6));
      } catch (const std::exception&) {
        schema("phi", "bad coordinate in \"" + kind + "\"");
      }
    } else if (j.is_object() && j.contains("index")) {
      idx = integer(j["index"], "phi.index");
    } else if (kind != "coord") {
      schema("phi", "unknown test function \"" + kind + "\"");
    }
    if (idx < 1 || idx > dim) schema("phi.index", "coordinate out of range 1.." + std::to_string(dim));
    phi.coord = static_cast<int>(idx - 1);
    return phi;
  }
  if (kind == "bump") {
    phi.kind = PhiSpec::Kind::Bump;
    if (j.is_object() && j.contains("center")) {
      phi.center = vector_field(j["center"], "phi.center");
    } else {
      phi.center.assign(static_cast<size_t>(dim), 1.0 / dim);
    }
    if (static_cast<int>(phi.center.size()) != dim) schema("phi.center", "must have length dim");
    for (double x : phi.center)
      if (!(x > 0.0)) schema("phi.center", "must be strictly positive");
    const double s = l1_norm(phi.center);
    for (double& x : phi.center) x /= s;
    if (j.is_object() && j.contains("radius")) phi.radius = number(j["radius"], "phi.radius");
    if (!(phi.radius > 0.0)) schema("phi.radius", "must be positive");
    return phi;
  }
  schema("phi", "unknown test function \"" + kind + "\"");
}

json phi_to_json(const PhiSpec& phi) {
  switch (phi.kind) {
    case PhiSpec::Kind::Const1: return "const1";
    case PhiSpec::Kind::Coord: return json{{"kind", "coord"}, {"index", phi.coord + 1}};
    case PhiSpec::Kind::Bump: return json{{"kind", "bump"}, {"center", phi.center}, {"radius", phi.radius}};
  }
  return "const1";
}

// ---------------------------------------------------------------------------------------------
// configuration

FiniteEnsemble RunConfig::ensemble() const { return ensemble_from_json(ensemble_doc); }

RunConfig parse_config(const json& doc, const std::string& base_dir) {
  if (!doc.is_object()) schema("", "config must be a JSON object");
  static const std::set<std::string> known = {
      "ensemble", "ensemble_file", "dim",          "atoms",      "probs",      "scalar_reference",
      "f",        "v",             "n_list",       "paths",      "s",          "q",
      "resolution", "grid",        "seed",         "out",        "phi",        "interval",
      "tail",     "observable",    "observables",  "s_range",    "t_values",   "direct_paths",
      "cross_n",  "cross_offset",  "n_tail",       "md_scale",   "llt_variants", "z"};
  RunConfig c;
  for (const auto& [key, value] : doc.items())
    if (!known.count(key)) c.warnings.push_back("unknown key \"" + key + "\" ignored");

  if (doc.contains("ensemble")) {
    if (!doc["ensemble"].is_object()) schema("ensemble", "expected an object");
    c.ensemble_doc = doc["ensemble"];
  } else if (doc.contains("ensemble_file")) {
    if (!doc["ensemble_file"].is_string()) schema("ensemble_file", "expected a path");
    c.ensemble_file = doc["ensemble_file"].get<std::string>();
    std::filesystem::path p(c.ensemble_file);
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    std::ifstream in(p);
    if (!in) schema("ensemble_file", "cannot open " + p.string());
    try {
      c.ensemble_doc = json::parse(in);
    } catch (const json::parse_error& e) {
      schema("ensemble_file", std::string("parse error: ") + e.what());
    }
  } else {
    json e = json::object();
    for (const char* k : {"dim", "atoms", "probs", "scalar_reference"})
      if (doc.contains(k)) e[k] = doc[k];
    if (e.empty()) schema("ensemble", "missing (give \"ensemble\", \"ensemble_file\" or top-level dim/atoms/probs)");
    c.ensemble_doc = e;
  }
  std::vector<std::string> ens_warnings;
  const FiniteEnsemble ens = ensemble_from_json(c.ensemble_doc, &ens_warnings);
  for (auto& w : ens_warnings) c.warnings.push_back("ensemble: " + w);
  const int d = ens.dim;

  c.f = doc.contains("f") ? vector_field(doc["f"], "f") : ones(d);
  c.v = doc.contains("v") ? vector_field(doc["v"], "v") : ones(d);
  for (const auto* vec : {&c.f, &c.v}) {
    const std::string name = vec == &c.f ? "f" : "v";
    if (static_cast<int>(vec->size()) != d) schema(name, "length must equal dim = " + std::to_string(d));
    double s = 0.0;
    for (double x : *vec) {
      if (x < 0.0) schema(name, "entries must be nonnegative");
      s += x;
    }
    if (!(s > 0.0)) schema(name, "must be nonzero");
  }
  if (doc.contains("n_list")) {
    if (!doc["n_list"].is_array() || doc["n_list"].empty()) schema("n_list", "expected a nonempty array");
    c.n_list.clear();
    for (size_t i = 0; i < doc["n_list"].size(); ++i) {
      const long long n = integer(doc["n_list"][i], "n_list[" + std::to_string(i) + "]");
      if (n < 1) schema("n_list[" + std::to_string(i) + "]", "must be >= 1");
      if (!c.n_list.empty() && n <= c.n_list.back())
        schema("n_list[" + std::to_string(i) + "]", "n_list must be strictly increasing");
      c.n_list.push_back(static_cast<int>(n));
    }
  }
  if (doc.contains("paths")) {
    const long long p = integer(doc["paths"], "paths");
    if (p < 1000) schema("paths", "sample counts must be >= 1000");
    c.paths = static_cast<size_t>(p);
  }
  if (doc.contains("direct_paths")) {
    const long long p = integer(doc["direct_paths"], "direct_paths");
    if (p != 0 && p < 1000) schema("direct_paths", "sample counts must be >= 1000 (or 0 to disable)");
    c.direct_paths = static_cast<size_t>(p);
  }
  if (doc.contains("s_range")) {
    const auto& r = doc["s_range"];
    if (!r.is_array() || r.size() != 3) schema("s_range", "expected [lo, hi, count]");
    c.s_lo = number(r[0], "s_range[0]");
    c.s_hi = number(r[1], "s_range[1]");
    c.s_count = static_cast<int>(integer(r[2], "s_range[2]"));
    if (!(c.s_lo < 0.0 && c.s_hi > 0.0)) schema("s_range", "range must contain 0 in its interior");
    if (c.s_count < 5) schema("s_range[2]", "need at least 5 samples");
  }
  if (doc.contains("s")) {
    c.s = number(doc["s"], "s");
    if (*c.s < c.s_lo || *c.s > c.s_hi) schema("s", "outside the rate-function range [s_lo, s_hi]");
  }
  if (doc.contains("q")) c.q = number(doc["q"], "q");
  if (doc.contains("z")) c.z = number(doc["z"], "z");
  if (doc.contains("resolution")) {
    const long long r = integer(doc["resolution"], "resolution");
    if (r < 2 || r > 4096) schema("resolution", "must be in [2, 4096]");
    c.resolution = static_cast<int>(r);
  }
  if (doc.contains("grid")) {
    if (!doc["grid"].is_string()) schema("grid", "expected \"linear\" or \"chebyshev\"");
    try {
      c.grid = parse_grid_kind(doc["grid"].get<std::string>());
    } catch (const Error&) {
      schema("grid", "expected \"linear\" or \"chebyshev\"");
    }
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned() && !(doc["seed"].is_number_integer() && doc["seed"].get<long long>() >= 0))
      schema("seed", "expected a nonnegative integer");
    c.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("out")) {
    if (!doc["out"].is_string()) schema("out", "expected a directory path");
    c.out = doc["out"].get<std::string>();
  }
  if (doc.contains("phi")) c.phi = parse_phi(doc["phi"], d);
  if (doc.contains("interval")) {
    const auto& iv = doc["interval"];
    if (!iv.is_array() || iv.size() != 2) schema("interval", "expected [a1, a2]");
    c.a1 = number(iv[0], "interval[0]");
    c.a2 = number(iv[1], "interval[1]");
    if (!(c.a1 < c.a2)) schema("interval", "need a1 < a2");
  }
  if (doc.contains("tail")) {
    const auto& t = doc["tail"];
    if (t == "upper") c.tail = Tail::Upper;
    else if (t == "lower") c.tail = Tail::Lower;
    else schema("tail", "expected \"upper\" or \"lower\"");
  }
  auto parse_obs = [](const json& j, const std::string& field) {
    if (!j.is_string()) schema(field, "expected an observable name");
    try {
      return parse_observable(j.get<std::string>());
    } catch (const Error&) {
      schema(field, "unknown observable \"" + j.get<std::string>() + "\"");
    }
  };
  if (doc.contains("observables")) {
    if (!doc["observables"].is_array() || doc["observables"].empty()) schema("observables", "expected a nonempty array");
    c.observables.clear();
    for (size_t i = 0; i < doc["observables"].size(); ++i)
      c.observables.push_back(parse_obs(doc["observables"][i], "observables[" + std::to_string(i) + "]"));
  } else if (doc.contains("observable")) {
    c.observables = {parse_obs(doc["observable"], "observable")};
  }
  if (doc.contains("t_values")) c.t_values = vector_field(doc["t_values"], "t_values");
  if (doc.contains("cross_n")) {
    c.cross_n = static_cast<int>(integer(doc["cross_n"], "cross_n"));
    if (c.cross_n < 1) schema("cross_n", "must be >= 1");
  }
  if (doc.contains("cross_offset")) {
    c.cross_offset = number(doc["cross_offset"], "cross_offset");
    if (!(c.cross_offset > 0.0)) schema("cross_offset", "must be positive");
  }
  if (doc.contains("n_tail")) {
    c.n_tail = static_cast<int>(integer(doc["n_tail"], "n_tail"));
    if (c.n_tail < 1) schema("n_tail", "must be >= 1");
  }
  if (doc.contains("md_scale")) {
    c.md_scale = number(doc["md_scale"], "md_scale");
    if (!(c.md_scale > 0.0)) schema("md_scale", "must be positive");
  }
  if (doc.contains("llt_variants")) {
    if (!doc["llt_variants"].is_array()) schema("llt_variants", "expected an array");
    c.llt_variants.clear();
    for (size_t i = 0; i < doc["llt_variants"].size(); ++i) {
      const auto& e = doc["llt_variants"][i];
      const std::string field = "llt_variants[" + std::to_string(i) + "]";
      if (!e.is_string()) schema(field, "expected a string");
      const auto name = e.get<std::string>();
      if (name != "center" && name != "moderate" && name != "large")
        schema(field, "expected \"center\", \"moderate\" or \"large\"");
      c.llt_variants.push_back(name);
    }
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::SchemaViolation, "cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("config parse error: ") + e.what());
  }
  return parse_config(doc, std::filesystem::path(path).parent_path().string());
}

json config_to_json(const RunConfig& c) {
  json j;
  j["ensemble"] = c.ensemble_doc;
  j["f"] = c.f;
  j["v"] = c.v;
  j["n_list"] = c.n_list;
  j["paths"] = c.paths;
  if (c.s) j["s"] = *c.s;
  if (c.q) j["q"] = *c.q;
  if (c.z) j["z"] = *c.z;
  j["resolution"] = c.resolution;
  j["grid"] = grid_kind_name(c.grid);
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["phi"] = phi_to_json(c.phi);
  j["interval"] = {c.a1, c.a2};
  if (c.tail) j["tail"] = tail_name(*c.tail);
  json obs = json::array();
  for (Observable o : c.observables) obs.push_back(observable_name(o));
  j["observables"] = obs;
  j["s_range"] = {c.s_lo, c.s_hi, c.s_count};
  j["t_values"] = c.t_values;
  j["direct_paths"] = c.direct_paths;
  j["cross_n"] = c.cross_n;
  j["cross_offset"] = c.cross_offset;
  j["n_tail"] = c.n_tail;
  j["md_scale"] = c.md_scale;
  j["llt_variants"] = c.llt_variants;
  return j;
}

// ---------------------------------------------------------------------------------------------
// reports

void ComparisonReport::add(const std::string& formula, const std::string& observable, int n, double x, double x2,
                           double empirical, double predicted, double se) {
  rows.push_back({formula, observable, n, x, x2, empirical, predicted, se, empirical / predicted});
}

std::vector<const ReportRow*> ComparisonReport::select(const std::string& formula,
                                                       const std::string& observable) const {
  std::vector<const ReportRow*> out;
  for (const auto& r : rows)
    if (r.formula == formula && (observable.empty() || r.observable == observable)) out.push_back(&r);
  return out;
}

std::string report_csv(const ComparisonReport& r) {
  std::ostringstream out;
  out << "# conelab " << r.command << "\n";
  out << "# ensemble_hash: " << r.ensemble_hash << "\n";
  out << "# seed: " << r.seed << "\n";
  for (const auto& [id, expr] : r.formulas) out << "# formula " << id << ": " << expr << "\n";
  out << "formula,observable,n,x,x2,empirical,predicted,se,ratio\n";
  for (const auto& row : r.rows)
    out << row.formula << "," << row.observable << "," << row.n << "," << fmt(row.x) << "," << fmt(row.x2) << ","
        << fmt(row.empirical) << "," << fmt(row.predicted) << "," << fmt(row.se) << "," << fmt(row.ratio) << "\n";
  return out.str();
}

void emit_report(const ComparisonReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out << report_csv(report);
}

// ---------------------------------------------------------------------------------------------
// model

Model build_model(const RunConfig& cfg) {
  Model m;
  m.ensemble = std::make_shared<FiniteEnsemble>(cfg.ensemble());
  m.grid = build_adapted_grid(*m.ensemble, cfg.resolution, m.ensemble->dim == 2 ? cfg.grid : GridKind::Linear);
  m.hash = ensemble_hash(*m.ensemble);
  return m;
}

const CumulantTable& Model::cumulant_table(const RunConfig& cfg) {
  if (!table)
    table = std::make_shared<CumulantTable>(
        lambda_curve(*ensemble, grid, linspace(cfg.s_lo, cfg.s_hi, cfg.s_count), options));
  return *table;
}

const SpectralSolution& Model::base_solution() {
  if (!base) base = std::make_shared<SpectralSolution>(solve(0.0));
  return *base;
}

SpectralSolution Model::solve(double s) const { return solve_spectral(*ensemble, s, grid, options); }

// ---------------------------------------------------------------------------------------------
// formulas

double edgeworth_cdf(double y, int n, double sigma, double m3, double drift) {
  const double rn = std::sqrt(static_cast<double>(n));
  return normal_cdf(y) + m3 / (6.0 * sigma * sigma * sigma * rn) * (1.0 - y * y) * normal_pdf(y) -
         drift / (sigma * rn) * normal_pdf(y);
}

double interval_factor(double s, double a1, double a2) {
  if (s == 0.0) return a2 - a1;
  return (std::expm1(-s * a1) - std::expm1(-s * a2)) / s;
}

double brp_prediction(double prefactor, int n, double rate, double s, double sigma_s) {
  return prefactor * std::exp(-n * rate) / (std::abs(s) * sigma_s * std::sqrt(2.0 * std::numbers::pi * n));
}

double llt_center_prediction(double a1, double a2, int n, double sigma, double nu_phi) {
  return (a2 - a1) * nu_phi / (sigma * std::sqrt(2.0 * std::numbers::pi * n));
}

double spectral_drift_b(const Model& model, std::span<const double> v, double h) {
  auto L = [&](double s) {
    const SpectralSolution sol = model.solve(s);
    return std::log(sol.r(v)) - std::log(sol.nu_r);
  };
  const double coarse = (L(h) - L(-h)) / (2.0 * h);
  const double fine = (L(h / 2) - L(-h / 2)) / h;
  return (4.0 * fine - coarse) / 3.0;
}

double spectral_drift_d(const SpectralSolution& base, std::span<const double> f) {
  return base.nu([&](std::span<const double> u) { return std::log(dot(f, u)); });
}

double scalar_exact_expectation(const ScalarReference& ref, int n, const std::function<double(double)>& h) {
  const size_t m = ref.scalars.size();
  if (m < 1 || m > 3) throw Error(ErrorCode::InvalidArgument, "exact enumeration supports 1 to 3 scalars");
  std::vector<double> lg(static_cast<size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) lg[static_cast<size_t>(k)] = std::lgamma(k + 1.0);
  std::vector<double> lc(m), lp(m);
  for (size_t i = 0; i < m; ++i) {
    lc[i] = std::log(ref.scalars[i].first);
    lp[i] = std::log(ref.scalars[i].second);
  }
  const double lgn = lg[static_cast<size_t>(n)];
  double acc = 0.0;
  if (m == 1) return h(n * lc[0]);
  for (int k0 = 0; k0 <= n; ++k0) {
    if (m == 2) {
      const int k1 = n - k0;
      const double lw = lgn - lg[static_cast<size_t>(k0)] - lg[static_cast<size_t>(k1)] + k0 * lp[0] + k1 * lp[1];
      acc += std::exp(lw) * h(k0 * lc[0] + k1 * lc[1]);
      continue;
    }
    for (int k1 = 0; k0 + k1 <= n; ++k1) {
      const int k2 = n - k0 - k1;
      const double lw = lgn - lg[static_cast<size_t>(k0)] - lg[static_cast<size_t>(k1)] - lg[static_cast<size_t>(k2)] +
                        k0 * lp[0] + k1 * lp[1] + k2 * lp[2];
      if (lw < -745.0) continue;
      acc += std::exp(lw) * h(k0 * lc[0] + k1 * lc[1] + k2 * lc[2]);
    }
  }
  return acc;
}

double scalar_offset(const ScalarReference& ref, Observable obs, std::span<const double> f, std::span<const double> v,
                     int n) {
  return scalar_base_offset(ref.base, obs, f, v, n);
}

// ---------------------------------------------------------------------------------------------
// commands

CommandResult cmd_check(const RunConfig& cfg, std::ostream& log) {
  CommandResult res;
  Model m = build_model(cfg);
  const ConditionReport c = check_conditions(*m.ensemble);
  log << "atoms: " << m.ensemble->size() << ", dim: " << m.ensemble->dim << ", hash: " << m.hash << "\n";
  log << "A1 comparability constant c = " << fmt(c.c_full) << (c.a1 ? " (holds)" : " (fails)") << "\n";
  log << "A2 column constant c = " << fmt(c.c_col) << ", epsilon = 1/(c d) = " << fmt(c.epsilon)
      << (c.a2 ? " (holds)" : " (fails)") << "\n";
  log << "A3 non-arithmetic heuristic: " << (c.nonarithmetic_heuristic ? "true" : "false");
  if (c.witness_i >= 0)
    log << " (log rho ratio of atoms " << c.witness_i << "," << c.witness_j << " = " << fmt(c.witness_ratio)
        << ", nearest " << c.witness_p << "/" << c.witness_q << " at distance " << fmt(c.witness_distance) << ")";
  log << "\n";
  log << "moments: log^3 N " << (c.moment_log3 ? "finite" : "infinite") << ", N^eta "
      << (c.moment_exp ? "finite" : "infinite") << "\n";
  ComparisonReport r = new_report("check", "check", m, cfg);
  r.formulas["condition-constant"] = "value of the named constant (predicted = NaN)";
  const double nan = std::nan("");
  r.add("condition-constant", "c_full", 0, 0, 0, c.c_full, nan, 0);
  r.add("condition-constant", "c_col", 0, 0, 0, c.c_col, nan, 0);
  r.add("condition-constant", "epsilon", 0, 0, 0, c.epsilon, nan, 0);
  r.add("condition-constant", "nonarithmetic_heuristic", 0, 0, 0, c.nonarithmetic_heuristic ? 1.0 : 0.0, nan, 0);
  res.reports.push_back(std::move(r));
  if (!c.a2) res.exit_code = 2;
  return res;
}

CommandResult cmd_spectral(const RunConfig& cfg, std::ostream& log) {
  CommandResult res;
  Model m = build_model(cfg);
  if (!cfg.s) schema("s", "required by the spectral command");
  const double s = *cfg.s;
  const SpectralSolution sol = m.solve(s);
  std::filesystem::create_directories(cfg.out);
  write_spectral_csv(sol, (std::filesystem::path(cfg.out) / "spectral.csv").string());
  const CoefficientEigendata ce = coefficient_eigendata(sol, cfg.f);
  log << "s = " << fmt(s) << ", kappa = " << fmt(sol.kappa) << ", conjugate kappa = " << fmt(sol.kappa_conjugate)
      << "\n";
  log << "residual = " << fmt(sol.residual) << ", conjugate residual = " << fmt(sol.residual_conjugate)
      << ", nu_s(r_s) = " << fmt(sol.nu_r) << ", iterations = " << sol.iterations << "\n";
  log << "nu_{s,f}(r_{s,f}) = " << fmt(ce.nu_of_r) << ", residual = " << fmt(ce.residual) << "\n";

  ComparisonReport r = new_report("spectral", "spectral", m, cfg);
  r.formulas["eigen-residual"] = "max_i |P_s r_s - kappa r_s|(x_i) / (kappa max r_s), predicted 0";
  r.formulas["coefficient-normalization"] = "nu_{s,f}(r_{s,f}), predicted 1";
  r.formulas["kappa-closed-form"] = "scalar reference: rho(M)^s E c^s";
  r.formulas["perturbed-eigenvalue"] = "dominant eigenvalue of R_{s,z} vs e^{-q z} kappa(s+z)/kappa(s), q = Lambda'(s)";
  r.add("eigen-residual", "r_s", 0, s, 0, sol.residual, 0.0, 0.0);
  r.add("eigen-residual", "r_s_star", 0, s, 0, sol.residual_conjugate, 0.0, 0.0);
  r.add("coefficient-normalization", "coefficient", 0, s, 0, ce.nu_of_r, 1.0, 0.0);
  add_check(res, "eigen-residual", sol.residual <= 1e-8, "residual " + fmt(sol.residual));
  add_check(res, "coefficient-normalization", std::abs(ce.nu_of_r - 1.0) <= 1e-8, "nu_{s,f}(r_{s,f}) " + fmt(ce.nu_of_r));
  if (m.ensemble->scalar) {
    const double k = std::exp(m.ensemble->scalar->Lambda(s));
    r.add("kappa-closed-form", "kappa", 0, s, 0, sol.kappa, k, 0.0);
    add_check(res, "kappa-closed-form", std::abs(std::log(sol.kappa) - std::log(k)) <= 1e-6,
              "kappa " + fmt(sol.kappa) + " vs " + fmt(k));
  }
  if (cfg.z) {
    const PerturbedCheck pc = perturbed_eigenvalue_check(*m.ensemble, m.grid, s, *cfg.z, m.options);
    log << "perturbed operator: lambda = " << fmt(pc.lambda_operator) << ", formula = " << fmt(pc.lambda_formula)
        << ", discrepancy = " << fmt(pc.discrepancy) << "\n";
    r.add("perturbed-eigenvalue", "R_sz", 0, s, *cfg.z, pc.lambda_operator, pc.lambda_formula, 0.0);
    add_check(res, "perturbed-eigenvalue", pc.discrepancy <= 1e-6, "discrepancy " + fmt(pc.discrepancy));
  }
  res.reports.push_back(std::move(r));
  return res;
}

CommandResult cmd_cumulants(const RunConfig& cfg, std::ostream& log) {
  CommandResult res;
  Model m = build_model(cfg);
  const CumulantTable& t = m.cumulant_table(cfg);
  std::filesystem::create_directories(cfg.out);
  write_lambda_csv(t, (std::filesystem::path(cfg.out) / "lambda.csv").string());
  write_legendre_csv(t, (std::filesystem::path(cfg.out) / "legendre.csv").string());
  for (const auto& w : t.warnings) res.warnings.push_back(w);
  log << "lambda = " << fmt(t.lambda1) << ", sigma^2 = " << fmt(t.sigma2) << ", m3 = " << fmt(t.m3) << "\n";
  log << "spline vs difference discrepancy: d1 " << fmt(t.max_d1_discrepancy) << ", d3 " << fmt(t.max_d3_discrepancy)
      << "\n";

  ComparisonReport r = new_report("cumulants", "cumulants", m, cfg);
  const double nan = std::nan("");
  r.formulas["Lambda"] = "log kappa(s) from the transfer operator; predicted = closed form for scalar references";
  r.formulas["cumulant"] = "Lambda'(0), Lambda''(0), Lambda'''(0) by Richardson central differences";
  const auto* ref = m.ensemble->scalar ? &*m.ensemble->scalar : nullptr;
  double worst = 0.0;
  for (size_t i = 0; i < t.s_samples.size(); ++i) {
    const double s = t.s_samples[i];
    const double exact = ref ? ref->Lambda(s) : nan;
    r.add("Lambda", "norm", 0, s, 0, t.Lambda[i], exact, 0.0);
    if (ref) worst = std::max(worst, std::abs(t.Lambda[i] - exact));
  }
  r.add("cumulant", "lambda", 0, 0, 0, t.lambda1, ref ? ref->lambda1() : nan, 0.0);
  r.add("cumulant", "sigma2", 0, 0, 0, t.sigma2, ref ? ref->sigma2() : nan, 0.0);
  r.add("cumulant", "m3", 0, 0, 0, t.m3, ref ? ref->m3() : nan, 0.0);
  add_check(res, "Lambda-convex", t.convex, "min second difference " + fmt(t.min_second_difference));
  if (ref) {
    add_check(res, "Lambda-closed-form", worst <= 1e-6, "max |Lambda - closed form| " + fmt(worst));
    add_check(res, "cumulants-closed-form",
              std::abs(t.lambda1 - ref->lambda1()) <= 1e-6 && std::abs(t.sigma2 - ref->sigma2()) <= 1e-5 &&
                  std::abs(t.m3 - ref->m3()) <= 1e-3,
              "errors " + fmt(t.lambda1 - ref->lambda1()) + ", " + fmt(t.sigma2 - ref->sigma2()) + ", " +
                  fmt(t.m3 - ref->m3()));
  }
  res.reports.push_back(std::move(r));
  return res;
}

CommandResult cmd_edgeworth(const RunConfig& cfg, std::ostream& log) {
  CommandResult res;
  Model m = build_model(cfg);
  const CumulantTable& t = m.cumulant_table(cfg);
  const double lambda = t.lambda1, sigma = std::sqrt(t.sigma2), m3 = t.m3;
  if (!(sigma > 0.0)) throw Error(ErrorCode::DerivativeUnstable, "sigma is zero");
  const int d = m.ensemble->dim;
  const SpectralSolution& base = m.base_solution();
  const double b_v = spectral_drift_b(m, cfg.v);
  const double d_f = spectral_drift_d(base, cfg.f);
  const auto one = ones(d);
  const double b_one = spectral_drift_b(m, one);
  log << "lambda = " << fmt(lambda) << ", sigma = " << fmt(sigma) << ", m3 = " << fmt(m3) << ", b(v) = " << fmt(b_v)
      << ", d(f) = " << fmt(d_f) << ", b(1) = " << fmt(b_one) << "\n";

  std::vector<Observable> obs;
  for (Observable o : cfg.observables)
    if (o == Observable::Coefficient || o == Observable::VectorNorm || o == Observable::MatrixNorm) obs.push_back(o);
  if (obs.empty()) obs.push_back(Observable::Coefficient);
  auto drift = [&](Observable o) {
    if (o == Observable::Coefficient) return b_v + d_f;
    if (o == Observable::VectorNorm) return b_v;
    return b_one;
  };

  ComparisonReport r = new_report("edgeworth", "edgeworth", m, cfg);
  ComparisonReport summary = new_report("edgeworth_summary", "edgeworth", m, cfg);
  r.formulas["gaussian-cdf"] = "Phi(y)";
  r.formulas["edgeworth-cdf"] =
      "Phi(y) + m3/(6 sigma^3 sqrt n) (1 - y^2) phi(y) - D/(sigma sqrt n) phi(y); D = b(v)+d(f) (coefficient), "
      "b(v) (vecnorm), b(1) (matnorm)";
  r.formulas["exact-scalar-cdf"] = "scalar reference: exact law of sum log c_k plus the deterministic part";
  summary.formulas["sup-gaussian"] = "empirical = sup over the y-grid of |F_emp - Phi|, x = sqrt(n) * empirical";
  summary.formulas["sup-edgeworth"] = "empirical = sup over the y-grid of |F_emp - edgeworth-cdf|, x = sqrt(n) * empirical";
  const double nan = std::nan("");
  const auto ygrid = linspace(-3.0, 3.0, 41);
  const bool exact = exact_oracle_available(*m.ensemble);
  SamplerOptions opt;
  opt.matrix_observables = has(obs, Observable::MatrixNorm);
  const RandomStream root(cfg.seed);
  std::map<Observable, std::vector<std::pair<double, double>>> sups;  // (gauss, edgeworth) per n
  for (size_t k = 0; k < cfg.n_list.size(); ++k) {
    const int n = cfg.n_list[k];
    const double rn = std::sqrt(static_cast<double>(n));
    const PathObservables batch = simulate_paths(*m.ensemble, cfg.v, cfg.f, n, cfg.paths, root.split(k), opt);
    for (Observable o : obs) {
      const auto z = sorted_standardized(batch.column(o), n * lambda, sigma * rn);
      const auto F = ecdf_at(z, ygrid);
      double sg = 0.0, se = 0.0;
      const double off = exact ? scalar_offset(*m.ensemble->scalar, o, cfg.f, o == Observable::MatrixNorm ? one : cfg.v, n) : 0.0;
      for (size_t i = 0; i < ygrid.size(); ++i) {
        const double y = ygrid[i];
        const double g = normal_cdf(y), e = edgeworth_cdf(y, n, sigma, m3, drift(o));
        const double sd = std::sqrt(std::max(e * (1.0 - e), 0.0) / static_cast<double>(cfg.paths));
        r.add("gaussian-cdf", observable_label(o), n, y, 0, F[i], g, sd);
        r.add("edgeworth-cdf", observable_label(o), n, y, 0, F[i], e, sd);
        if (exact) {
          const double thr = n * lambda + y * sigma * rn - off;
          const double pe = scalar_exact_expectation(*m.ensemble->scalar, n,
                                                     [&](double x) { return x <= thr ? 1.0 : 0.0; });
          r.add("exact-scalar-cdf", observable_label(o), n, y, 0, F[i], pe, sd);
        }
        sg = std::max(sg, std::abs(F[i] - g));
        se = std::max(se, std::abs(F[i] - e));
      }
      summary.add("sup-gaussian", observable_label(o), n, rn * sg, 0, sg, nan, 0.0);
      summary.add("sup-edgeworth", observable_label(o), n, rn * se, 0, se, nan, 0.0);
      sups[o].push_back({sg, se});
      log << observable_label(o) << " n=" << n << ": sup|F-Phi| = " << fmt(sg) << ", sup|F-Edgeworth| = " << fmt(se)
          << ", sqrt(n)*sup = " << fmt(rn * se) << "\n";
    }
  }
  for (Observable o : obs) {
    const auto& v = sups[o];
    for (size_t k = 0; k < v.size(); ++k)
      add_check(res, std::string("edgeworth-beats-gaussian ") + observable_label(o) + " n=" + std::to_string(cfg.n_list[k]),
                v[k].second < v[k].first, fmt(v[k].second) + " vs " + fmt(v[k].first));
    for (size_t k = 1; k < v.size(); ++k) {
      const double a = std::sqrt(static_cast<double>(cfg.n_list[k - 1])) * v[k - 1].second;
      const double b = std::sqrt(static_cast<double>(cfg.n_list[k])) * v[k].second;
      add_check(res,
                std::string("sqrt-n-edgeworth-decreasing ") + observable_label(o) + " n=" +
                    std::to_string(cfg.n_list[k - 1]) + "->" + std::to_string(cfg.n_list[k]),
                b < a, fmt(a) + " -> " + fmt(b));
    }
  }
  res.reports.push_back(std::move(r));
  res.reports.push_back(std::move(summary));
  return res;
}

CommandResult cmd_berry_esseen(const RunConfig& cfg, std::ostream& log) {
  CommandResult res;
  Model m = build_model(cfg);
  const CumulantTable& t = m.cumulant_table(cfg);
  const double lambda = t.lambda1, sigma = std::sqrt(t.sigma2);
  if (!(sigma > 0.0)) throw Error(ErrorCode::DerivativeUnstable, "sigma is zero");
  const std::vector<Observable> obs{Observable::Coefficient, Observable::MatrixNorm, Observable::SpectralRadius};
  ComparisonReport r = new_report("berry_esseen", "berry-esseen", m, cfg);
  r.formulas["be-constant"] =
      "empirical = sqrt(n) sup_y |F_emp(y) - Phi(y)| for (X - n lambda)/(sigma sqrt n); predicted = median over n";
  r.formulas["iid-be-bound"] = "scalar reference: 0.4748 E|log c - E log c|^3 / sd(log c)^3 (classical i.i.d. bound)";
  const RandomStream root(cfg.seed);
  std::map<Observable, std::vector<double>> cn;
  for (size_t k = 0; k < cfg.n_list.size(); ++k) {
    const int n = cfg.n_list[k];
    const double rn = std::sqrt(static_cast<double>(n));
    const PathObservables batch = simulate_paths(*m.ensemble, cfg.v, cfg.f, n, cfg.paths, root.split(k));
    for (Observable o : obs) {
      const auto z = sorted_standardized(batch.column(o), n * lambda, sigma * rn);
      const double sup = ks_distance(z, normal_cdf);
      cn[o].push_back(rn * sup);
      log << observable_label(o) << " n=" << n << ": sup|F-Phi| = " << fmt(sup) << ", c_n = " << fmt(rn * sup) << "\n";
    }
  }
  for (Observable o : obs) {
    const auto& c = cn[o];
    const double med = median(c);
    for (size_t k = 0; k < c.size(); ++k)
      r.add("be-constant", observable_label(o), cfg.n_list[k], 0, 0, c[k], med,
            std::sqrt(static_cast<double>(cfg.n_list[k]) / static_cast<double>(cfg.paths)));
    const double mx = *std::max_element(c.begin(), c.end());
    const double mn = *std::min_element(c.begin(), c.end());
    add_check(res, std::string("be-bounded ") + observable_label(o), mx <= 2.0 * med && mn >= 0.5 * med,
              "c_n in [" + fmt(mn) + ", " + fmt(mx) + "], median " + fmt(med));
  }
  if (m.ensemble->scalar) {
    double mu = 0.0, var = 0.0, abs3 = 0.0;
    for (const auto& [c, p] : m.ensemble->scalar->scalars) mu += p * std::log(c);
    for (const auto& [c, p] : m.ensemble->scalar->scalars) {
      const double x = std::log(c) - mu;
      var += p * x * x;
      abs3 += p * std::abs(x * x * x);
    }
    const double bound = 0.4748 * abs3 / std::pow(var, 1.5);
    const auto& c = cn[Observable::SpectralRadius];
    r.add("iid-be-bound", observable_label(Observable::SpectralRadius), cfg.n_list.back(), 0, 0,
          *std::max_element(c.begin(), c.end()), bound, 0.0);
    log << "i.i.d. Berry-Esseen bound for the scalar part: " << fmt(bound) << "\n";
  }
  res.reports.push_back(std::move(r));
  return res;
}

namespace {

double brp_prefactor(const SpectralSolution& sol, Observable o, std::span<const double> f, std::span<const double> v) {
  const int d = sol.ensemble->dim;
  const auto one = ones(d);
  const auto e1 = unit(d, 0);
  switch (o) {
    case Observable::Coefficient: return sol.r(v) * sol.r_star(f) / sol.nu_r;
    case Observable::VectorNorm: return sol.r(v) * sol.r_star(one) / sol.nu_r;
    case Observable::MatrixNorm: return sol.r(one) * sol.r_star(one) / sol.nu_r;
    case Observable::Entry11: return sol.r(e1) * sol.r_star(e1) / sol.nu_r;
    case Observable::SpectralRadius: return 1.0;
  }
  return 1.0;
}

void append(std::vector<std::string>& to, const std::vector<std::string>& from, const std::string& prefix) {
  for (const auto& w : from) to.push_back(prefix + w);
}

}  // namespace

CommandResult cmd_ldp(const RunConfig& cfg, std::ostream& log) {
  CommandResult res;
  Model m = build_model(cfg);
  const CumulantTable& t = m.cumulant_table(cfg);
  double s, q;
  if (cfg.q) {
    q = *cfg.q;
    s = legendre(t, q).s_star;
  } else if (cfg.s) {
    s = *cfg.s;
    q = t.derivative(s, 1);
  } else {
    schema("s", "the ldp command needs \"s\" or \"q\"");
  }
  if (s == 0.0) throw Error(ErrorCode::InvalidArgument, "tilt s must be nonzero");
  const Tail tail = cfg.tail.value_or(s > 0.0 ? Tail::Upper : Tail::Lower);
  if ((tail == Tail::Upper) != (s > 0.0))
    throw Error(ErrorCode::WrongTilt, std::string(tail_name(tail)) + " tail needs s " + (s > 0 ? "< 0" : "> 0"));
  if (s < 0.0 && !check_conditions(*m.ensemble).a1)
    throw Error(ErrorCode::ConditionViolation, "lower-tail asymptotics need condition A1");
  const double rate = s * q - t.Lambda_at(s);
  const double sigma_s = t.sigma_s(s);
  const SpectralSolution sol = m.solve(s);
  log << "s = " << fmt(s) << ", q = " << fmt(q) << ", rate = " << fmt(rate) << ", sigma_s = " << fmt(sigma_s)
      << ", kappa = " << fmt(sol.kappa) << ", nu_s(r_s) = " << fmt(sol.nu_r) << ", tail = " << tail_name(tail) << "\n";

  std::vector<Observable> obs = cfg.observables;
  const bool rho = has(obs, Observable::SpectralRadius);
  std::vector<Observable> norm_obs;
  for (Observable o : obs)
    if (o != Observable::Coefficient) norm_obs.push_back(o);
  if (rho) {
    for (Observable o : {Observable::Entry11, Observable::MatrixNorm})
      if (!has(norm_obs, o)) norm_obs.push_back(o);
  }
  const bool need_matrix = std::any_of(norm_obs.begin(), norm_obs.end(), [](Observable o) {
    return o == Observable::MatrixNorm || o == Observable::Entry11 || o == Observable::SpectralRadius;
  });

  ComparisonReport r = new_report("ldp", "ldp", m, cfg);
  r.formulas["brp-coefficient"] =
      "r_s(v) r_s*(f) / nu_s(r_s) * exp(-n rate(q)) / (|s| sigma_s sqrt(2 pi n)), threshold n q";
  r.formulas["brp-vecnorm"] = "r_s(v) r_s*(1) / nu_s(r_s) * exp(-n rate(q)) / (|s| sigma_s sqrt(2 pi n))";
  r.formulas["brp-matnorm"] = "r_s(1) r_s*(1) / nu_s(r_s) * exp(-n rate(q)) / (|s| sigma_s sqrt(2 pi n))";
  r.formulas["brp-entry11"] = "r_s(e1) r_s*(e1) / nu_s(r_s) * exp(-n rate(q)) / (|s| sigma_s sqrt(2 pi n))";
  r.formulas["rho-normalized"] =
      "spectral radius: predicted = exp(-n rate(q)) / (|s| sigma_s sqrt(2 pi n)); the ratio is only bounded above "
      "and below";
  r.formulas["is-vs-direct"] = "importance-sampling estimate vs direct Monte Carlo at q = lambda +- offset sigma";
  const RandomStream root(cfg.seed);
  SamplerOptions opt;
  opt.matrix_observables = need_matrix;
  std::map<Observable, std::vector<double>> ratios;
  for (size_t k = 0; k < cfg.n_list.size(); ++k) {
    const int n = cfg.n_list[k];
    const double thr = n * q;
    const double tail_part = brp_prediction(1.0, n, rate, s, sigma_s);
    const RandomStream rs = root.split(k);
    if (has(obs, Observable::Coefficient)) {
      const TiltedBatch b = tilted_simulate(*m.ensemble, sol, TiltMode::Coefficient, cfg.f, cfg.v, n, cfg.paths,
                                            rs.split(0), opt);
      append(res.warnings, b.warnings, "n=" + std::to_string(n) + ": ");
      const ISEstimate e = is_probability(b, thr, tail, Observable::Coefficient);
      append(res.warnings, e.warnings, "n=" + std::to_string(n) + " coefficient: ");
      const double pred = brp_prefactor(sol, Observable::Coefficient, cfg.f, cfg.v) * tail_part;
      r.add("brp-coefficient", "coefficient", n, q, 0, e.estimate, pred, e.se);
      ratios[Observable::Coefficient].push_back(e.estimate / pred);
      log << "coefficient n=" << n << ": IS " << fmt(e.estimate) << " +- " << fmt(e.se) << ", predicted "
          << fmt(pred) << ", ratio " << fmt(e.estimate / pred) << "\n";
    }
    if (!norm_obs.empty()) {
      const TiltedBatch b =
          tilted_simulate(*m.ensemble, sol, TiltMode::Norm, cfg.f, cfg.v, n, cfg.paths, rs.split(1), opt);
      append(res.warnings, b.warnings, "n=" + std::to_string(n) + ": ");
      std::map<Observable, ISEstimate> est;
      for (Observable o : norm_obs) {
        est[o] = is_probability(b, thr, tail, o);
        append(res.warnings, est[o].warnings, "n=" + std::to_string(n) + " " + observable_label(o) + ": ");
        const double pred = brp_prefactor(sol, o, cfg.f, cfg.v) * tail_part;
        const std::string id = o == Observable::SpectralRadius ? "rho-normalized" : "brp-" + observable_label(o);
        r.add(id, observable_label(o), n, q, 0, est[o].estimate, pred, est[o].se);
        ratios[o].push_back(est[o].estimate / pred);
        log << observable_label(o) << " n=" << n << ": IS " << fmt(est[o].estimate) << " +- " << fmt(est[o].se)
            << ", predicted " << fmt(pred) << ", ratio " << fmt(est[o].estimate / pred) << "\n";
      }
      if (rho) {
        const double lo = std::min(est[Observable::Entry11].estimate, est[Observable::MatrixNorm].estimate);
        const double hi = std::max(est[Observable::Entry11].estimate, est[Observable::MatrixNorm].estimate);
        const double x = est[Observable::SpectralRadius].estimate;
        add_check(res, "rho-sandwich n=" + std::to_string(n), lo <= x && x <= hi,
                  fmt(lo) + " <= " + fmt(x) + " <= " + fmt(hi));
      }
    }
  }
  const int n_last = cfg.n_list.back();
  for (const auto& [o, rs] : ratios) {
    if (o == Observable::SpectralRadius) continue;
    const std::string name = observable_label(o);
    bool decreasing = true;
    std::string trail = fmt(rs[0]);
    for (size_t k = 1; k < rs.size(); ++k) {
      decreasing = decreasing && std::abs(rs[k] - 1.0) < std::abs(rs[k - 1] - 1.0);
      trail += " -> " + fmt(rs[k]);
    }
    if (rs.size() > 1) add_check(res, "brp-trend " + name, decreasing, "ratios " + trail);
    add_check(res, "brp-accuracy " + name + " n=" + std::to_string(n_last), std::abs(rs.back() - 1.0) <= 0.25,
              "ratio " + fmt(rs.back()));
  }
  if (rho) {
    for (Observable o : {Observable::Entry11, Observable::MatrixNorm}) {
      const double x = ratios[o].back();
      add_check(res, "rho-bounding-ratio " + observable_label(o) + " n=" + std::to_string(n_last), x >= 0.2 && x <= 5.0,
                "ratio " + fmt(x));
    }
  }
  if (cfg.direct_paths > 0) {
    const Observable o = obs.front() == Observable::SpectralRadius ? Observable::MatrixNorm : obs.front();
    const int n = cfg.cross_n;
    const double sigma = std::sqrt(t.sigma2);
    const double qc = t.lambda1 + (tail == Tail::Upper ? 1.0 : -1.0) * cfg.cross_offset * sigma;
    const double sc = legendre(t, qc).s_star;
    const SpectralSolution solc = m.solve(sc);
    SamplerOptions o2;
    o2.matrix_observables = o != Observable::Coefficient && o != Observable::VectorNorm;
    const TiltedBatch b = tilted_simulate(*m.ensemble, solc, o == Observable::Coefficient ? TiltMode::Coefficient : TiltMode::Norm,
                                          cfg.f, cfg.v, n, cfg.paths, root.split(1000), o2);
    const ISEstimate e = is_probability(b, n * qc, tail, o);
    const PathObservables direct =
        simulate_paths(*m.ensemble, cfg.v, cfg.f, n, cfg.direct_paths, root.split(1001), o2);
    double hits = 0.0;
    for (double x : direct.column(o)) hits += (tail == Tail::Upper ? x >= n * qc : x <= n * qc) ? 1.0 : 0.0;
    const double p = hits / static_cast<double>(cfg.direct_paths);
    const double pse = std::sqrt(p * (1.0 - p) / static_cast<double>(cfg.direct_paths));
    const double comb = std::sqrt(pse * pse + e.se * e.se);
    r.add("is-vs-direct", observable_label(o), n, qc, 0, e.estimate, p, comb);
    log << "cross-check n=" << n << " q=" << fmt(qc) << ": IS " << fmt(e.estimate) << " +- " << fmt(e.se)
        << ", direct " << fmt(p) << " +- " << fmt(pse) << "\n";
    add_check(res, "is-vs-direct", std::abs(e.estimate - p) <= 3.0 * comb,
              "difference " + fmt(e.estimate - p) + ", combined se " + fmt(comb));
  }
  res.reports.push_back(std::move(r));
  return res;
}

CommandResult cmd_llt(const RunConfig& cfg, std::ostream& log) {
  CommandResult res;
  Model m = build_model(cfg);
  const CumulantTable& t = m.cumulant_table(cfg);
  const double lambda = t.lambda1, sigma = std::sqrt(t.sigma2);
  const SpectralSolution& base = m.base_solution();
  const PhiSpec phi = cfg.phi;
  const double nu_phi = base.nu([&](std::span<const double> u) { return phi(u); });
  const auto want = [&](const char* v) {
    return std::find(cfg.llt_variants.begin(), cfg.llt_variants.end(), v) != cfg.llt_variants.end();
  };
  const double a1 = cfg.a1, a2 = cfg.a2;
  log << "lambda = " << fmt(lambda) << ", sigma = " << fmt(sigma) << ", nu(phi) = " << fmt(nu_phi) << " (phi = "
      << phi.name() << ")\n";

  ComparisonReport r = new_report("llt", "llt", m, cfg);
  r.formulas["llt-center"] = "(a2 - a1) nu(phi) / (sigma sqrt(2 pi n)); event X - n lambda in [a1, a2]";
  r.formulas["llt-moderate"] =
      "llt-center * exp(-n l^2/2 + n l^3 zeta(l)), l = md_scale n^(-1/4); event shifted by sigma n l";
  r.formulas["llt-large"] =
      "r_s(v)/nu_s(r_s) (e^(-s a1) - e^(-s a2))/s exp(-n rate(q))/(sigma_s sqrt(2 pi n)) nu_s(phi <f,.>^s); event X "
      "in [a1, a2] + n q";
  r.formulas["exact-scalar"] = "scalar reference: exact probability of the llt-center event by enumeration";
  r.formulas["char-decay"] = "|mean exp(i t log||G_n v||)|, x = t";
  const bool exact = exact_oracle_available(*m.ensemble);

  std::optional<SpectralSolution> sol_s;
  double q = 0, rate = 0, sigma_s = 0, pre_large = 0;
  if (want("large")) {
    if (!cfg.s) schema("s", "llt variant \"large\" needs a tilt s");
    const double s = *cfg.s;
    if (s == 0.0) throw Error(ErrorCode::InvalidArgument, "tilt s must be nonzero");
    sol_s = m.solve(s);
    q = t.derivative(s, 1);
    rate = s * q - t.Lambda_at(s);
    sigma_s = t.sigma_s(s);
    const auto& f = cfg.f;
    const double integral =
        sol_s->nu([&](std::span<const double> u) { return phi(u) * std::exp(s * std::log(dot(f, u))); });
    pre_large = sol_s->r(cfg.v) / sol_s->nu_r * interval_factor(s, a1, a2) * integral;
  }

  SamplerOptions opt;
  opt.matrix_observables = false;
  const RandomStream root(cfg.seed);
  std::vector<const PathObservables*> batches;
  std::vector<PathObservables> keep;
  keep.reserve(cfg.n_list.size());
  std::vector<double> center_ratio;
  const auto d = static_cast<size_t>(m.ensemble->dim);
  for (size_t k = 0; k < cfg.n_list.size(); ++k) {
    const int n = cfg.n_list[k];
    const double rn = std::sqrt(static_cast<double>(n));
    if (want("center") || want("moderate") || !cfg.t_values.empty()) {
      keep.push_back(simulate_paths(*m.ensemble, cfg.v, cfg.f, n, cfg.paths, root.split(k), opt));
      const PathObservables& b = keep.back();
      batches.push_back(&b);
      auto frequency = [&](double lo, double hi) {
        double s1 = 0.0, s2 = 0.0;
        for (size_t i = 0; i < b.count; ++i) {
          const double x = b.log_coeff[i] - n * lambda;
          if (x < lo || x > hi) continue;
          const double w = phi({b.endpoint.data() + i * d, d});
          s1 += w;
          s2 += w * w;
        }
        const double N = static_cast<double>(b.count);
        const double mean = s1 / N;
        return std::pair{mean, std::sqrt(std::max(0.0, s2 / N - mean * mean) / (N - 1.0))};
      };
      const double expected_count = static_cast<double>(cfg.paths) * (a2 - a1) / (sigma * std::sqrt(2.0 * std::numbers::pi * n));
      if (want("center")) {
        if (expected_count < 50.0)
          throw Error(ErrorCode::IntervalTooNarrow,
                      "expected count " + fmt(expected_count) + " < 50 at n = " + std::to_string(n));
        const auto [mean, se] = frequency(a1, a2);
        const double pred = llt_center_prediction(a1, a2, n, sigma, nu_phi);
        r.add("llt-center", "coefficient", n, a1, a2, mean, pred, se);
        center_ratio.push_back(mean / pred);
        log << "center n=" << n << ": frequency " << fmt(mean) << " +- " << fmt(se) << ", predicted " << fmt(pred)
            << ", ratio " << fmt(mean / pred) << "\n";
        if (exact) {
          const double off = scalar_offset(*m.ensemble->scalar, Observable::Coefficient, cfg.f, cfg.v, n);
          const double ph = phi(scalar_endpoint(m.ensemble->scalar->base, cfg.v, n));
          const double pe = ph * scalar_exact_expectation(*m.ensemble->scalar, n, [&](double x) {
                              const double y = x + off - n * lambda;
                              return y >= a1 && y <= a2 ? 1.0 : 0.0;
                            });
          r.add("exact-scalar", "coefficient", n, a1, a2, mean, pe, se);
          add_check(res, "llt-exact-oracle n=" + std::to_string(n), std::abs(mean - pe) <= 3.0 * se,
                    "frequency " + fmt(mean) + ", exact " + fmt(pe) + ", se " + fmt(se));
        }
      }
      if (want("moderate")) {
        const double l = cfg.md_scale * std::pow(static_cast<double>(n), -0.25);
        const double shift = sigma * n * l;
        const double pred = llt_center_prediction(a1, a2, n, sigma, nu_phi) *
                            std::exp(-n * l * l / 2.0 + n * l * l * l * cramer_series(t, 0.0, l));
        if (static_cast<double>(cfg.paths) * pred < 50.0)
          throw Error(ErrorCode::IntervalTooNarrow, "moderate-deviation window expects fewer than 50 hits at n = " +
                                                        std::to_string(n) + "; lower md_scale or raise paths");
        const auto [mean, se] = frequency(a1 + shift, a2 + shift);
        r.add("llt-moderate", "coefficient", n, a1 + shift, a2 + shift, mean, pred, se);
        log << "moderate n=" << n << " (l=" << fmt(l) << "): frequency " << fmt(mean) << " +- " << fmt(se)
            << ", predicted " << fmt(pred) << ", ratio " << fmt(mean / pred) << "\n";
      }
      (void)rn;
    }
    if (sol_s) {
      const TiltedBatch b = tilted_simulate(*m.ensemble, *sol_s, TiltMode::Coefficient, cfg.f, cfg.v, n, cfg.paths,
                                            root.split(k).split(7), opt);
      append(res.warnings, b.warnings, "n=" + std::to_string(n) + ": ");
      const ISEstimate e = is_interval(b, a1 + n * q, a2 + n * q, Observable::Coefficient,
                                       [&](std::span<const double> u) { return phi(u); });
      const double pred = pre_large * std::exp(-n * rate) / (sigma_s * std::sqrt(2.0 * std::numbers::pi * n));
      r.add("llt-large", "coefficient", n, a1 + n * q, a2 + n * q, e.estimate, pred, e.se);
      log << "large n=" << n << ": IS " << fmt(e.estimate) << " +- " << fmt(e.se) << ", predicted " << fmt(pred)
          << ", ratio " << fmt(e.estimate / pred) << "\n";
    }
  }
  if (!center_ratio.empty()) {
    const double x = center_ratio.back();
    add_check(res, "llt-center-ratio n=" + std::to_string(cfg.n_list.back()), x >= 0.85 && x <= 1.15,
              "ratio " + fmt(x));
  }
  {
    const double s0 = interval_factor(0.0, a1, a2);
    const double s1 = interval_factor(1e-12, a1, a2);
    add_check(res, "interval-factor-continuity", std::abs(s1 - s0) <= 1e-10,
              "factor(1e-12) - factor(0) = " + fmt(s1 - s0));
  }
  if (!cfg.t_values.empty() && !batches.empty()) {
    for (const auto& row : characteristic_decay_diagnostic(batches, cfg.t_values))
      r.add("char-decay", "vecnorm", row.n, row.t, 0, row.modulus, std::nan(""), 0.0);
  }
  res.reports.push_back(std::move(r));
  return res;
}

int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log) {
  for (const auto& w : cfg.warnings) log << "warning: " << w << "\n";
  CommandResult res;
  if (command == "check") res = cmd_check(cfg, log);
  else if (command == "spectral") res = cmd_spectral(cfg, log);
  else if (command == "cumulants") res = cmd_cumulants(cfg, log);
  else if (command == "edgeworth") res = cmd_edgeworth(cfg, log);
  else if (command == "berry-esseen") res = cmd_berry_esseen(cfg, log);
  else if (command == "ldp") res = cmd_ldp(cfg, log);
  else if (command == "llt") res = cmd_llt(cfg, log);
  else throw Error(ErrorCode::InvalidArgument, "unknown command \"" + command + "\"");
  std::filesystem::create_directories(cfg.out);
  for (const auto& r : res.reports) {
    const auto path = (std::filesystem::path(cfg.out) / (r.name + ".csv")).string();
    emit_report(r, path);
    log << "wrote " << path << "\n";
  }
  for (const auto& w : res.warnings) log << "warning: " << w << "\n";
  for (const auto& c : res.checks) log << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
  return res.exit_code;
}

}  // namespace conelab
