#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "crashml/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run configuration file (key = value lines)")
      ->required();
  cmd->add_option("--seed", args.seed, "override the configured master seed");
  cmd->add_option("--threads", args.threads, "override the configured worker thread count");
  cmd->add_option("--out", args.out, "override the configured output directory");
}

crashml::RunConfig load(const CommonArgs& args) {
  auto config = crashml::parse_run_config(args.config_path);
  if (args.seed) config.seed = *args.seed;
  if (args.threads) config.threads = *args.threads;
  if (args.out) config.out_dir = *args.out;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crash-data modeling pipeline: tree ensembles, lane-width simulation, rank tests"};
  app.require_subcommand(1);

  CommonArgs generate_args;
  CommonArgs run_args;
  auto* generate = app.add_subcommand("generate", "write a synthetic crash CSV plus truth file");
  add_common(generate, generate_args);
  auto* run = app.add_subcommand("run", "execute the full pipeline and write all reports");
  add_common(run, run_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      const auto out = crashml::cmd_generate(load(generate_args));
      std::cout << "wrote " << out.csv_path.string() << "\n";
      std::cout << "wrote " << out.truth_path.string() << "\n";
      return 0;
    }
    const auto config = load(run_args);
    const auto outputs = crashml::cmd_run(config);
    std::cout << "selected model: " << outputs.winner << "\n";
    for (const auto& name : outputs.artifacts) {
      std::cout << "wrote " << (std::filesystem::path(config.out_dir) / name).string() << "\n";
    }
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
