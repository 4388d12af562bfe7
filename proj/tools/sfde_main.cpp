#include <CLI11.hpp>

#include <iostream>

#include "sfde/commands.hpp"
#include "sfde/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Euler-Maruyama simulation and convergence studies for stochastic delay equations with jumps"};
  app.set_version_flag("--version", std::string(sfde::library_version()));
  app.require_subcommand(0, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out_dir;
  bool dump = false;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed, overrides the config");
  app.add_option("--workers", workers, "worker threads, overrides the config")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "output directory, overrides the config");
  app.add_flag("--dump-config", dump, "print the effective configuration and exit");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "write EM sample paths as CSV"},
      {"study", "strong-error convergence study with rate fits"},
      {"picard-check", "Picard iteration differences against EM on one lattice"},
      {"noise-check", "increment moments of a generated noise lattice"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sfde::exit_config;
  }

  sfde::RunConfig config;
  try {
    if (!config_path.empty()) config = sfde::parse_config_text(sfde::read_file(config_path));
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return sfde::exit_config;
  }
  if (seed) config.seed = *seed;
  if (workers) config.workers = *workers;
  if (out_dir) config.output_dir = *out_dir;

  if (dump) {
    std::cout << sfde::dump_config(config);
    return sfde::exit_ok;
  }
  const auto selected = app.get_subcommands();
  if (selected.empty()) {
    std::cerr << app.help();
    return sfde::exit_config;
  }
  return sfde::run_command(selected.front()->get_name(), config, std::cout, std::cerr);
}
