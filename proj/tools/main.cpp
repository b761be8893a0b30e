#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "safegain/config.hpp"
#include "safegain/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"safegain: barrier-filter scenario runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "scenario config (JSON)")
        ->required();
    cmd->add_option("--out", out_dir, "output directory override");
    cmd->add_option("--workers", workers, "worker threads for sweep cells");
    cmd->add_option("--seed", seed, "sampling seed override");
    cmd->add_option("--dt", dt, "integration step override");
  };

  CLI::App* run = app.add_subcommand("run", "execute the configured stages");
  add_common(run);
  CLI::App* cert =
      app.add_subcommand("certify", "run certification stages only");
  add_common(cert);
  CLI::App* list = app.add_subcommand("list", "list registered scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list->parsed()) {
      std::cout << safegain::list_scenarios_text();
      return 0;
    }
    safegain::CliOverrides ov;
    ov.out_dir = out_dir;
    ov.workers = workers;
    ov.seed = seed;
    ov.dt = dt;
    ov.certify_only = cert->parsed();
    return safegain::run_scenario(config_path, ov);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
