// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "conelab/ensemble.hpp"
#include "conelab/rate_function.hpp"
#include "conelab/sampler.hpp"
#include "conelab/transfer_operator.hpp"
#include "json.hpp"

namespace conelab {

// Test functions on the simplex. All members are Lipschitz for the Hilbert metric.
struct PhiSpec {
  enum class Kind { Const1, Coord, Bump };
  Kind kind = Kind::Const1;
  int coord = 0;                // Coord: u -> u_{coord}
  std::vector<double> center;   // Bump: max(0, 1 - d(u, center)/radius)
  double radius = 0.5;

  double operator()(std::span<const double> u) const;
  std::string name() const;
};

PhiSpec parse_phi(const nlohmann::json& j, int dim);
nlohmann::json phi_to_json(const PhiSpec& phi);

struct RunConfig {
  nlohmann::json ensemble_doc;  // inline ensemble (resolved from "ensemble_file" when given)
  std::string ensemble_file;
  std::vector<double> f;
  std::vector<double> v;
  std::vector<int> n_list{64, 256, 1024};
  size_t paths = 100000;
  std::optional<double> s;
  std::optional<double> q;
  int resolution = 64;
  GridKind grid = GridKind::Chebyshev;
  std::uint64_t seed = 1;
  std::string out = "out";
  PhiSpec phi;
  double a1 = 0.0;
  double a2 = 1.0;
  std::optional<Tail> tail;
  std::vector<Observable> observables{Observable::Coefficient};
  double s_lo = -2.0;
  double s_hi = 2.0;
  int s_count = 41;
  std::vector<double> t_values;
  size_t direct_paths = 0;
  int cross_n = 30;
  double cross_offset = 0.3;
  int n_tail = 200;
  double md_scale = 0.25;  // l_n = md_scale * n^{-1/4}
  std::vector<std::string> llt_variants{"center"};
  std::optional<double> z;
  std::vector<std::string> warnings;

  FiniteEnsemble ensemble() const;
};

// Strict validation; unknown keys become warnings. base_dir resolves a relative "ensemble_file".
RunConfig parse_config(const nlohmann::json& doc, const std::string& base_dir = "");
RunConfig load_config(const std::string& path);
nlohmann::json config_to_json(const RunConfig& cfg);

struct ReportRow {
  std::string formula;
  std::string observable;
  int n = 0;
  double x = 0.0;   // y, q, or interval start
  double x2 = 0.0;  // interval end when relevant
  double empirical = 0.0;
  double predicted = 0.0;
  double se = 0.0;
  double ratio = 0.0;
};

struct ComparisonReport {
  std::string name;  // file stem
  std::string command;
  std::map<std::string, std::string> formulas;  // identifier -> expression
  std::string ensemble_hash;
  std::uint64_t seed = 0;
  std::vector<ReportRow> rows;

  void add(const std::string& formula, const std::string& observable, int n, double x, double x2, double empirical,
           double predicted, double se);
  std::vector<const ReportRow*> select(const std::string& formula, const std::string& observable = "") const;
};

std::string report_csv(const ComparisonReport& report);
void emit_report(const ComparisonReport& report, const std::string& path);

struct Check {
  std::string name;
  bool passed = true;
  std::string detail;
};

struct CommandResult {
  std::vector<ComparisonReport> reports;
  std::vector<Check> checks;
  std::vector<std::string> warnings;
  int exit_code = 0;
};

// Shared numerical state for one configuration.
struct Model {
  std::shared_ptr<FiniteEnsemble> ensemble;
  SimplexGrid grid;
  SolveOptions options;
  std::string hash;
  std::shared_ptr<CumulantTable> table;  // built on demand
  std::shared_ptr<SpectralSolution> base;  // s = 0 solution

  const CumulantTable& cumulant_table(const RunConfig& cfg);
  const SpectralSolution& base_solution();
  SpectralSolution solve(double s) const;
};

Model build_model(const RunConfig& cfg);

CommandResult cmd_check(const RunConfig& cfg, std::ostream& log);
CommandResult cmd_spectral(const RunConfig& cfg, std::ostream& log);
CommandResult cmd_cumulants(const RunConfig& cfg, std::ostream& log);
CommandResult cmd_edgeworth(const RunConfig& cfg, std::ostream& log);
CommandResult cmd_berry_esseen(const RunConfig& cfg, std::ostream& log);
CommandResult cmd_ldp(const RunConfig& cfg, std::ostream& log);
CommandResult cmd_llt(const RunConfig& cfg, std::ostream& log);

// Dispatches by name, writes every report to cfg.out, prints checks; returns the exit code.
int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log);

// Prediction formulas.
double edgeworth_cdf(double y, int n, double sigma, double m3, double drift);
// (e^{-s a1} - e^{-s a2}) / s, continuous at s = 0.
double interval_factor(double s, double a1, double a2);
// prefactor * e^{-n rate} / (|s| sigma_s sqrt(2 pi n)).
double brp_prediction(double prefactor, int n, double rate, double s, double sigma_s);
// (a2 - a1) nu(phi) / (sigma sqrt(2 pi n)).
double llt_center_prediction(double a1, double a2, int n, double sigma, double nu_phi);
// b(v) = lim E log||G_n v|| - n lambda from the s-derivative of log r_s(v) - log nu_s(r_s) at 0.
double spectral_drift_b(const Model& model, std::span<const double> v, double h = 1e-2);
// d(f) = ∫ log <f,u> dnu(u).
double spectral_drift_d(const SpectralSolution& base, std::span<const double> f);
// E h(sum_{k<n} log c_k) by enumeration of counts, for a scalar reference with at most 3 scalars.
double scalar_exact_expectation(const ScalarReference& ref, int n, const std::function<double(double)>& h);
// Deterministic part of a scalar-reference observable: log<f,M^n v> (coefficient, vecnorm with f = 1) or log||M^n||.
double scalar_offset(const ScalarReference& ref, Observable obs, std::span<const double> f, std::span<const double> v,
                     int n);

}  // namespace conelab
