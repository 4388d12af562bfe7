#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sfde/analysis.hpp"
#include "sfde/solver.hpp"

namespace sfde {

/// Equation family and its parameters. `params` is normalized on parse: every
/// key the family understands is present.
struct EquationSpec {
  std::string family = "zero";
  nlohmann::json params = nlohmann::json::object();
  std::optional<double> truncation_radius;
  bool operator==(const EquationSpec&) const = default;
};

struct InitialSpec {
  std::string kind = "constant";  ///< constant | affine
  std::vector<double> value{1.0};
  std::vector<double> slope;      ///< affine only
  bool operator==(const InitialSpec&) const = default;
};

struct SimulateSpec {
  std::size_t lags = 0;   ///< N
  std::size_t steps = 0;  ///< M
  std::size_t paths = 1;
  std::size_t dense_ratio = 1;  ///< > 1 writes the continuous solution on a finer grid
  bool operator==(const SimulateSpec&) const = default;
};

struct StudySpec {
  std::vector<double> deltas;
  std::vector<double> moments{2.0};
  std::size_t paths = 100;
  std::string reference = "fine_em";  ///< fine_em | exact
  std::size_t refinement_ratio = 32;
  bool operator==(const StudySpec&) const = default;
};

struct PicardSpec {
  double fine_step = 1.0 / 1024;
  std::size_t iterations = 20;
  bool operator==(const PicardSpec&) const = default;
};

struct NoiseCheckSpec {
  double fine_step = 1e-3;
  std::size_t samples = 100000;
  std::size_t brownian_dim = 1;
  std::vector<unsigned> moments{1, 2, 3, 4};
  double tolerance_se = 4.0;
  bool operator==(const NoiseCheckSpec&) const = default;
};

/// Everything one CLI invocation needs. Sections a command does not use are
/// carried along so a dumped config reproduces the run.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::string output_dir = "out";
  EquationSpec equation;
  InitialSpec initial;
  double tau = 1.0;
  double horizon = 1.0;
  double intensity = 0.0;
  SimulateSpec simulate;
  StudySpec study;
  PicardSpec picard;
  NoiseCheckSpec noise_check;
  bool operator==(const RunConfig&) const = default;
};

/// Throws ConfigError whose message starts with the offending key, e.g.
/// "study.deltas[1]: must be positive". Unknown keys are rejected.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig parse_config_text(std::string_view text);
nlohmann::json to_json(const RunConfig& config);
/// Pretty-printed JSON that parse_config_text accepts.
std::string dump_config(const RunConfig& config);

/// Families with a declared global Lipschitz constant.
bool globally_lipschitz(const EquationSpec& equation);

CoefficientSet build_coefficients(const RunConfig& config);
InitialData build_initial(const RunConfig& config);
/// Throws ConfigError unless a seed is set.
std::uint64_t require_seed(const RunConfig& config);
EmConfig simulate_config(const RunConfig& config);
StudyConfig study_config(const RunConfig& config);

}  // namespace sfde
