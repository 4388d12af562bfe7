#include "sfde/commands.hpp"

#include <filesystem>
#include <ostream>
#include <sstream>

#include "sfde/io.hpp"

#ifndef SFDE_VERSION
#define SFDE_VERSION "unknown"
#endif

namespace sfde {
namespace {

namespace fs = std::filesystem;

// Maps library exceptions to exit codes. Every command body runs inside it.
template <typename Body>
int guarded(const char* command, std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << command << ": config error: " << e.what() << '\n';
    return exit_config;
  } catch (const DomainError& e) {
    err << command << ": config error: " << e.what() << '\n';
    return exit_config;
  } catch (const NumericalError& e) {
    err << command << ": numerical failure: " << e.what() << '\n';
    return exit_numerical;
  } catch (const fs::filesystem_error& e) {
    err << command << ": i/o error: " << e.what() << '\n';
    return exit_config;
  }
}

void write_manifest(const RunConfig& config, const std::string& command, const std::vector<std::string>& outputs,
                    const nlohmann::json& summary) {
  nlohmann::json manifest = {{"command", command},
                             {"version", library_version()},
                             {"seed", config.seed ? nlohmann::json(*config.seed) : nlohmann::json()},
                             {"config", to_json(config)},
                             {"outputs", outputs},
                             {"summary", summary}};
  write_file_atomically(fs::path(config.output_dir) / "manifest.json", manifest.dump(2) + "\n");
}

std::string path_file_name(std::size_t index) { return "path_" + std::to_string(index) + ".csv"; }

double path_sup(const PathGrid& path) {
  double best = 0.0;
  for (std::size_t i = 0; i < path.size(); ++i) best = std::max(best, euclidean_norm(path.node(i)));
  return best;
}

}  // namespace

const char* library_version() noexcept { return SFDE_VERSION; }

int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded("simulate", err, [&] {
    const std::uint64_t seed = require_seed(config);
    const EmConfig cfg = simulate_config(config);
    const std::size_t ratio = config.simulate.dense_ratio;
    const double fine_step = cfg.step() / static_cast<double>(ratio);
    const std::size_t paths = config.simulate.paths;

    std::vector<std::string> csv(paths);
    std::vector<double> sups(paths);
    parallel_for(paths, config.workers, [&](std::size_t i) {
      try {
        const NoiseLattice noise = generate_lattice(seed, i, cfg.horizon, fine_step, cfg.coefficients.brownian_dim,
                                                    config.intensity);
        PathGrid path = em_discrete(cfg, coarsen(noise, ratio));
        if (ratio > 1) path = em_dense_eval(path, cfg, noise);
        std::ostringstream os;
        write_path_csv(path, os);
        csv[i] = os.str();
        sups[i] = path_sup(path);
      } catch (const NumericalError& e) {
        throw NumericalError("path " + std::to_string(i) + ": " + e.what());
      }
    });

    std::vector<std::string> outputs;
    for (std::size_t i = 0; i < paths; ++i) {
      write_file_atomically(fs::path(config.output_dir) / path_file_name(i), csv[i]);
      outputs.push_back(path_file_name(i));
      out << "path " << i << " seed " << seed << " sup_norm " << format_double(sups[i]) << '\n';
    }
    write_manifest(config, "simulate", outputs, {{"paths", paths}, {"step", cfg.step()}});
    return static_cast<int>(exit_ok);
  });
}

int cmd_study(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded("study", err, [&] {
    const StudyConfig study = study_config(config);
    const StudyReport report = convergence_study(study);
    write_file_atomically(fs::path(config.output_dir) / "study.csv", study_report_csv(report));
    write_file_atomically(fs::path(config.output_dir) / "rates.csv", rate_csv(report));

    nlohmann::json slopes = nlohmann::json::array();
    for (const auto& fit : report.rates) {
      if (fit.root) {
        out << "p=" << format_double(fit.p) << " root-error slope " << format_double(fit.root->slope)
            << " mean slope " << format_double(fit.mean->slope) << '\n';
        slopes.push_back({{"p", fit.p}, {"root_slope", fit.root->slope}, {"mean_slope", fit.mean->slope}});
      } else {
        err << "study: warning: p=" << format_double(fit.p) << ": " << fit.warning << '\n';
        slopes.push_back({{"p", fit.p}, {"warning", fit.warning}});
      }
    }
    out << "max path sup " << format_double(report.max_path_sup) << '\n';
    write_manifest(config, "study", {"study.csv", "rates.csv"},
                   {{"fine_step", report.fine_step}, {"max_path_sup", report.max_path_sup}, {"rates", slopes}});
    return static_cast<int>(exit_ok);
  });
}

int cmd_picard_check(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded("picard-check", err, [&] {
    if (!globally_lipschitz(config.equation)) {
      throw ConfigError("equation.family: picard-check needs a globally Lipschitz family, '" + config.equation.family +
                        "' is only locally Lipschitz");
    }
    const std::uint64_t seed = require_seed(config);
    const double h = config.picard.fine_step;
    EmConfig cfg;
    cfg.coefficients = build_coefficients(config);
    cfg.initial = build_initial(config);
    cfg.tau = config.tau;
    cfg.horizon = config.horizon;
    try {
      cfg = cfg.with_step(h);
      cfg.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("picard.fine_step: ") + e.what());
    }
    const NoiseLattice noise =
        generate_lattice(seed, 0, cfg.horizon, h, cfg.coefficients.brownian_dim, config.intensity);
    const PicardResult result = picard_solve(cfg, noise, config.picard.iterations);
    const auto& d = result.differences;

    std::ostringstream table;
    table << "n,d_n,ratio\n";
    for (std::size_t n = 0; n < d.size(); ++n) {
      table << n << ',' << format_double(d[n]) << ',';
      if (n > 0 && d[n - 1] > 0.0) table << format_double(d[n] / d[n - 1]);
      table << '\n';
    }
    write_file_atomically(fs::path(config.output_dir) / "picard.csv", table.str());

    const double floor = picard_noise_floor(result);
    const std::size_t n0 = picard_monotone_from(d, floor);
    const double gap = result.iterates.empty() ? 0.0 : sup_gap(em_discrete(cfg, noise), result.iterates.back());

    nlohmann::json summary = {{"iterations", d.size()}, {"gap_to_em", gap}, {"diverged", result.diverged}};
    if (!d.empty()) {
      out << "final difference " << format_double(d.back()) << '\n';
      summary["final_difference"] = d.back();
      summary["noise_floor"] = floor;
      summary["monotone_from"] = n0;
      if (d.front() > floor) {
        out << "strictly decreasing from n = " << n0 << " down to the rounding floor " << format_double(floor) << '\n';
      } else {
        out << "differences are at the rounding floor from the start\n";
      }
    }
    out << "sup gap to EM on the same lattice " << format_double(gap) << '\n';
    write_manifest(config, "picard-check", {"picard.csv"}, summary);
    if (result.diverged) {
      err << "picard-check: iteration diverged after " << d.size() << " steps\n";
      return static_cast<int>(exit_numerical);
    }
    return static_cast<int>(exit_ok);
  });
}

int cmd_noise_check(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded("noise-check", err, [&] {
    const std::uint64_t seed = require_seed(config);
    const auto& spec = config.noise_check;
    const double horizon = spec.fine_step * static_cast<double>(spec.samples);
    const NoiseLattice noise = generate_lattice(seed, 0, horizon, spec.fine_step, spec.brownian_dim, config.intensity);
    const auto checks = check_increment_moments(noise, spec.moments, spec.tolerance_se);

    std::ostringstream table;
    table << "name,empirical,expected,std_error,passed\n";
    bool all = true;
    for (const auto& c : checks) {
      const bool ok = c.passed();
      all = all && ok;
      table << c.name << ',' << format_double(c.empirical) << ',' << format_double(c.expected) << ','
            << format_double(c.std_error) << ',' << (ok ? 1 : 0) << '\n';
      out << (ok ? "PASS " : "FAIL ") << c.name << " empirical " << format_double(c.empirical) << " expected "
          << format_double(c.expected) << " se " << format_double(c.std_error) << '\n';
    }
    write_file_atomically(fs::path(config.output_dir) / "noise_check.csv", table.str());
    write_manifest(config, "noise-check", {"noise_check.csv"}, {{"passed", all}, {"cells", noise.cells()}});
    if (!all) {
      err << "noise-check: at least one moment is outside " << format_double(spec.tolerance_se)
          << " standard errors\n";
      return static_cast<int>(exit_check_failed);
    }
    return static_cast<int>(exit_ok);
  });
}

int run_command(const std::string& name, const RunConfig& config, std::ostream& out, std::ostream& err) {
  if (name == "simulate") return cmd_simulate(config, out, err);
  if (name == "study") return cmd_study(config, out, err);
  if (name == "picard-check") return cmd_picard_check(config, out, err);
  if (name == "noise-check") return cmd_noise_check(config, out, err);
  err << "unknown command '" << name << "'\n";
  return exit_config;
}

}  // namespace sfde
