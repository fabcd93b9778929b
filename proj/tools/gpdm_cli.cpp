#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gpdm/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-process dialogue policies: training, committees, adaptation"};
  app.require_subcommand(1);

  struct Cmd {
    const char* name;
    const char* desc;
  };
  const Cmd cmds[] = {
      {"train", "train INDOM/GEN/GOLD policies with checkpointed evaluation"},
      {"evaluate", "evaluate a saved policy or committee snapshot"},
      {"adapt", "adapt a saved policy to a new domain, with and without its prior"},
      {"committee", "train a committee with home-domain reward distribution"},
      {"multiagent", "train committees under the NAIV/WINN/SCALE/MBCM reward strategies"},
      {"entropy", "report per-slot normalized entropies and cross-domain slot matches"},
      {"chat", "drive one policy by typing dialogue acts"},
  };

  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  for (const auto& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.desc);
    sub->add_option("--config", config_path, "experiment config JSON")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--seed", seed, "replace the config's seed list with this one seed");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    gpdm::ExperimentConfig cfg = gpdm::load_config(config_path);
    if (seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed)};
    gpdm::run_experiment(command, cfg, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
