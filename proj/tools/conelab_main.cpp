// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "conelab/errors.hpp"
#include "conelab/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"conelab: limit theorems for products of positive random matrices"};
  app.require_subcommand(1);
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  for (const char* name : {"check", "spectral", "cumulants", "edgeworth", "berry-esseen", "ldp", "llt"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--out", out, "override the output directory");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    conelab::RunConfig cfg = conelab::load_config(config);
    auto* sub = app.get_subcommands().front();
    if (sub->count("--seed")) cfg.seed = seed;
    if (sub->count("--out")) cfg.out = out;
    return conelab::run_command(command, cfg, std::cout);
  } catch (const conelab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
