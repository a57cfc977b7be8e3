// Command-line driver: loads a run configuration and runs one experiment or all of them.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "horoflow/runner.hpp"

namespace {

int run(const std::vector<std::string>& names, horoflow::RunConfig cfg) {
  const horoflow::Context ctx = horoflow::make_context(cfg);
  bool all_ok = true;
  for (const auto& name : names) {
    horoflow::ExperimentReport rep;
    try {
      rep = horoflow::run_experiment(name, ctx);
    } catch (const horoflow::ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      std::cerr << name << ": error: " << e.what() << '\n';
      all_ok = false;
      continue;
    }
    horoflow::write_report(rep, cfg.output);
    std::cout << rep.summary_line() << '\n';
    all_ok = all_ok && rep.pass();
  }
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"horoflow: perturbed geodesic flows and horocycle equidistribution on hyperbolic surfaces"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  app.add_option("--config", config_path, "JSON run configuration (comments allowed)")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides HOROFLOW_OUT and the config)");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  std::vector<std::string> commands = horoflow::experiment_names();
  commands.push_back("all");
  for (const auto& c : commands) app.add_subcommand(c, c == "all" ? "run every experiment" : "run " + c);

  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    horoflow::RunConfig cfg = config_path.empty() ? horoflow::RunConfig{} : horoflow::load_config(config_path);
    if (const char* env = std::getenv("HOROFLOW_OUT"); env && *env) cfg.output = env;
    if (!out_dir.empty()) cfg.output = out_dir;
    if (app.count("--seed")) cfg.seed = seed;
    if (app.count("--threads")) cfg.threads = threads;
    std::vector<std::string> names;
    if (cmd == "all")
      names = horoflow::experiment_names();
    else
      names = {cmd};
    return run(names, cfg);
  } catch (const horoflow::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
