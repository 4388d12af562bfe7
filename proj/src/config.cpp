#include "sfde/config.hpp"

#include <cmath>
#include <set>

namespace sfde {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& key, const std::string& message) {
  throw ConfigError(key + ": " + message);
}

// One table of the document. Every key read is recorded so that finish()
// can reject the rest.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_.empty() ? "config" : path_, "must be a table");
  }

  std::string key(const std::string& name) const { return path_.empty() ? name : path_ + "." + name; }

  bool has(const std::string& name) {
    seen_.insert(name);
    return node_.contains(name) && !node_.at(name).is_null();
  }

  const json& at(const std::string& name) {
    if (!has(name)) fail(key(name), "is required");
    return node_.at(name);
  }

  double number(const std::string& name, std::optional<double> fallback = std::nullopt) {
    if (!has(name)) {
      if (!fallback) fail(key(name), "is required");
      return *fallback;
    }
    return as_number(node_.at(name), key(name));
  }

  double positive(const std::string& name, std::optional<double> fallback = std::nullopt) {
    const double v = number(name, fallback);
    if (!(v > 0.0)) fail(key(name), "must be positive");
    return v;
  }

  std::size_t count(const std::string& name, std::size_t fallback, std::size_t minimum) {
    const std::size_t v = has(name) ? as_count(node_.at(name), key(name)) : fallback;
    if (v < minimum) fail(key(name), "must be at least " + std::to_string(minimum));
    return v;
  }

  std::string text(const std::string& name, const std::string& fallback) {
    if (!has(name)) return fallback;
    const json& v = node_.at(name);
    if (!v.is_string()) fail(key(name), "must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& name, std::vector<double> fallback) {
    if (!has(name)) return fallback;
    return as_numbers(node_.at(name), key(name));
  }

  void finish() const {
    for (const auto& item : node_.items()) {
      if (!seen_.count(item.key())) fail(key(item.key()), "unknown key");
    }
  }

  static double as_number(const json& v, const std::string& key) {
    if (!v.is_number()) fail(key, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite");
    return x;
  }

  static std::size_t as_count(const json& v, const std::string& key) {
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_number_integer()) fail(key, "must not be negative");
    fail(key, "must be a non-negative integer");
  }

  static std::vector<double> as_numbers(const json& v, const std::string& key) {
    if (!v.is_array()) fail(key, "must be a list of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], key + "[" + std::to_string(i) + "]"));
    return out;
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

// Scalar parameters with defaults; anything else in `params` is rejected.
json scalar_params(const json& raw, const std::string& path, std::initializer_list<std::pair<const char*, double>> keys) {
  Section s(raw, path);
  json out = json::object();
  for (const auto& [name, fallback] : keys) out[name] = s.number(name, fallback);
  s.finish();
  return out;
}

bool is_matrix(const json& v) { return v.is_array() && !v.empty() && v[0].is_array(); }

Eigen::MatrixXd to_matrix(const json& v, const std::string& key) {
  if (v.is_number()) return Eigen::MatrixXd::Constant(1, 1, Section::as_number(v, key));
  if (!is_matrix(v)) fail(key, "must be a number or a list of rows");
  const auto rows = static_cast<Eigen::Index>(v.size());
  const auto cols = static_cast<Eigen::Index>(v[0].size());
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const std::string row_key = key + "[" + std::to_string(i) + "]";
    const auto row = Section::as_numbers(v[static_cast<std::size_t>(i)], row_key);
    if (static_cast<Eigen::Index>(row.size()) != cols) fail(row_key, "rows differ in length");
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = row[static_cast<std::size_t>(j)];
  }
  return out;
}

// A diffusion coefficient is a matrix per Brownian column: a number or a
// single matrix means one column, a list of matrices one per column.
std::vector<Eigen::MatrixXd> to_matrices(const json& v, const std::string& key) {
  if (v.is_array() && !v.empty() && is_matrix(v[0])) {
    std::vector<Eigen::MatrixXd> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(to_matrix(v[i], key + "[" + std::to_string(i) + "]"));
    return out;
  }
  return {to_matrix(v, key)};
}

json linear_params(const json& raw, const std::string& path) {
  Section s(raw, path);
  json out = json::object();
  for (const char* name : {"a0", "a1", "b0", "b1", "c0", "c1"}) {
    if (!s.has(name)) {
      out[name] = 0.0;
      continue;
    }
    const json& v = s.at(name);
    const std::string key = s.key(name);
    if (name[0] == 'b') {
      to_matrices(v, key);
    } else {
      to_matrix(v, key);
    }
    out[name] = v;
  }
  s.finish();
  return out;
}

json distributed_params(const json& raw, const std::string& path) {
  Section s(raw, path);
  json out = json::object();
  const json& atoms = s.at("atoms");
  const std::string atoms_key = s.key("atoms");
  if (!atoms.is_array() || atoms.empty()) fail(atoms_key, "must be a non-empty list of {theta, weight}");
  out["atoms"] = json::array();
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    Section atom(atoms[i], atoms_key + "[" + std::to_string(i) + "]");
    const double theta = atom.number("theta");
    const double weight = atom.number("weight");
    if (theta > 0.0) fail(atom.key("theta"), "must be <= 0");
    if (weight < 0.0) fail(atom.key("weight"), "must be >= 0");
    atom.finish();
    out["atoms"].push_back({{"theta", theta}, {"weight", weight}});
  }
  out["b"] = s.number("b", 0.0);
  out["c"] = s.number("c", 0.0);
  s.finish();
  return out;
}

EquationSpec parse_equation(const json& node) {
  Section s(node, "equation");
  EquationSpec eq;
  eq.family = s.text("family", "zero");
  const json empty = json::object();
  const json& raw = s.has("params") ? s.at("params") : empty;
  const std::string path = s.key("params");
  if (eq.family == "zero") {
    Section p(raw, path);
    eq.params = {{"dim", p.count("dim", 1, 1)}, {"brownian_dim", p.count("brownian_dim", 1, 0)}};
    p.finish();
  } else if (eq.family == "geometric" || eq.family == "log_growth") {
    eq.params = scalar_params(raw, path, {{"a", 0.0}, {"b", 0.0}, {"c", 0.0}});
  } else if (eq.family == "linear_delay") {
    eq.params = linear_params(raw, path);
  } else if (eq.family == "distributed_delay") {
    eq.params = distributed_params(raw, path);
  } else {
    fail(s.key("family"), "unknown family '" + eq.family +
                              "' (expected zero, geometric, linear_delay, distributed_delay or log_growth)");
  }
  if (s.has("truncation_radius")) eq.truncation_radius = s.positive("truncation_radius");
  s.finish();
  return eq;
}

InitialSpec parse_initial(const json& node) {
  Section s(node, "initial");
  InitialSpec init;
  init.kind = s.text("kind", "constant");
  init.value = s.numbers("value", {1.0});
  if (init.value.empty()) fail(s.key("value"), "must not be empty");
  if (init.kind == "affine") {
    init.slope = s.numbers("slope", std::vector<double>(init.value.size(), 0.0));
    if (init.slope.size() != init.value.size()) fail(s.key("slope"), "must have the same length as initial.value");
  } else if (init.kind != "constant") {
    fail(s.key("kind"), "must be 'constant' or 'affine'");
  }
  s.finish();
  return init;
}

SimulateSpec parse_simulate(const json& node) {
  Section s(node, "simulate");
  SimulateSpec out;
  out.lags = s.count("lags", 0, 0);
  out.steps = s.count("steps", 0, 0);
  out.paths = s.count("paths", 1, 1);
  out.dense_ratio = s.count("dense_ratio", 1, 1);
  s.finish();
  return out;
}

StudySpec parse_study(const json& node) {
  Section s(node, "study");
  StudySpec out;
  out.deltas = s.numbers("deltas", {});
  for (std::size_t i = 0; i < out.deltas.size(); ++i) {
    if (!(out.deltas[i] > 0.0)) fail(s.key("deltas") + "[" + std::to_string(i) + "]", "must be positive");
  }
  out.moments = s.numbers("moments", {2.0});
  for (std::size_t i = 0; i < out.moments.size(); ++i) {
    if (!(out.moments[i] >= 2.0)) fail(s.key("moments") + "[" + std::to_string(i) + "]", "must be >= 2");
  }
  out.paths = s.count("paths", 100, 1);
  out.reference = s.text("reference", "fine_em");
  if (out.reference != "fine_em" && out.reference != "exact") fail(s.key("reference"), "must be 'fine_em' or 'exact'");
  out.refinement_ratio = s.count("refinement_ratio", 32, 1);
  s.finish();
  return out;
}

PicardSpec parse_picard(const json& node) {
  Section s(node, "picard");
  PicardSpec out;
  out.fine_step = s.positive("fine_step", out.fine_step);
  out.iterations = s.count("iterations", out.iterations, 0);
  s.finish();
  return out;
}

NoiseCheckSpec parse_noise_check(const json& node) {
  Section s(node, "noise_check");
  NoiseCheckSpec out;
  out.fine_step = s.positive("fine_step", out.fine_step);
  out.samples = s.count("samples", out.samples, 2);
  out.brownian_dim = s.count("brownian_dim", out.brownian_dim, 0);
  if (s.has("moments")) {
    const json& v = s.at("moments");
    if (!v.is_array() || v.empty()) fail(s.key("moments"), "must be a non-empty list of positive integers");
    out.moments.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string key = s.key("moments") + "[" + std::to_string(i) + "]";
      const std::size_t p = Section::as_count(v[i], key);
      if (p < 1 || p > 16) fail(key, "must be between 1 and 16");
      out.moments.push_back(static_cast<unsigned>(p));
    }
  }
  out.tolerance_se = s.positive("tolerance_se", out.tolerance_se);
  s.finish();
  return out;
}

const json& section_or_empty(Section& root, const char* name) {
  static const json empty = json::object();
  return root.has(name) ? root.at(name) : empty;
}

// Re-raises a library error with the config key it came from.
template <typename Body>
auto keyed(const std::string& key, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    fail(key, e.what());
  } catch (const DomainError& e) {
    fail(key, e.what());
  }
}

}  // namespace

RunConfig parse_config(const json& doc) {
  Section root(doc, "");
  RunConfig c;
  if (root.has("seed")) {
    const json& v = root.at("seed");
    if (!v.is_number_unsigned()) fail("seed", "must be a non-negative integer");
    c.seed = v.get<std::uint64_t>();
  }
  c.workers = root.count("workers", 1, 1);
  c.output_dir = root.text("output_dir", "out");
  if (c.output_dir.empty()) fail("output_dir", "must not be empty");
  c.tau = root.positive("tau", 1.0);
  c.horizon = root.positive("horizon", 1.0);
  c.intensity = root.number("intensity", 0.0);
  if (c.intensity < 0.0) fail("intensity", "must be >= 0");
  c.equation = parse_equation(section_or_empty(root, "equation"));
  c.initial = parse_initial(section_or_empty(root, "initial"));
  c.simulate = parse_simulate(section_or_empty(root, "simulate"));
  c.study = parse_study(section_or_empty(root, "study"));
  c.picard = parse_picard(section_or_empty(root, "picard"));
  c.noise_check = parse_noise_check(section_or_empty(root, "noise_check"));
  root.finish();
  return c;
}

RunConfig parse_config_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

json to_json(const RunConfig& c) {
  json out = json::object();
  if (c.seed) out["seed"] = *c.seed;
  out["workers"] = c.workers;
  out["output_dir"] = c.output_dir;
  out["tau"] = c.tau;
  out["horizon"] = c.horizon;
  out["intensity"] = c.intensity;
  out["equation"] = {{"family", c.equation.family}, {"params", c.equation.params}};
  if (c.equation.truncation_radius) out["equation"]["truncation_radius"] = *c.equation.truncation_radius;
  out["initial"] = {{"kind", c.initial.kind}, {"value", c.initial.value}};
  if (c.initial.kind == "affine") out["initial"]["slope"] = c.initial.slope;
  out["simulate"] = {{"lags", c.simulate.lags},
                     {"steps", c.simulate.steps},
                     {"paths", c.simulate.paths},
                     {"dense_ratio", c.simulate.dense_ratio}};
  out["study"] = {{"deltas", c.study.deltas},
                  {"moments", c.study.moments},
                  {"paths", c.study.paths},
                  {"reference", c.study.reference},
                  {"refinement_ratio", c.study.refinement_ratio}};
  out["picard"] = {{"fine_step", c.picard.fine_step}, {"iterations", c.picard.iterations}};
  out["noise_check"] = {{"fine_step", c.noise_check.fine_step},
                        {"samples", c.noise_check.samples},
                        {"brownian_dim", c.noise_check.brownian_dim},
                        {"moments", c.noise_check.moments},
                        {"tolerance_se", c.noise_check.tolerance_se}};
  return out;
}

std::string dump_config(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

bool globally_lipschitz(const EquationSpec& equation) { return equation.family != "log_growth"; }

CoefficientSet build_coefficients(const RunConfig& config) {
  const EquationSpec& eq = config.equation;
  const json& p = eq.params;
  CoefficientSet out = keyed("equation.params", [&] {
    if (eq.family == "zero") {
      return zero_coefficients(p.at("dim").get<std::size_t>(), p.at("brownian_dim").get<std::size_t>());
    }
    if (eq.family == "geometric") {
      return geometric_coefficients(p.at("a").get<double>(), p.at("b").get<double>(), p.at("c").get<double>());
    }
    if (eq.family == "log_growth") {
      return log_growth_coefficients(p.at("a").get<double>(), p.at("b").get<double>(), p.at("c").get<double>());
    }
    if (eq.family == "linear_delay") {
      LinearDelayParams lp;
      lp.a0 = to_matrix(p.at("a0"), "equation.params.a0");
      lp.a1 = to_matrix(p.at("a1"), "equation.params.a1");
      lp.b0 = to_matrices(p.at("b0"), "equation.params.b0");
      lp.b1 = to_matrices(p.at("b1"), "equation.params.b1");
      lp.c0 = to_matrix(p.at("c0"), "equation.params.c0");
      lp.c1 = to_matrix(p.at("c1"), "equation.params.c1");
      return linear_delay_coefficients(lp);
    }
    if (eq.family == "distributed_delay") {
      std::vector<DelayAtom> atoms;
      for (const auto& a : p.at("atoms")) atoms.push_back({a.at("theta").get<double>(), a.at("weight").get<double>()});
      const CoefficientSet base = linear_delay_coefficients(
          LinearDelayParams::scalar(0.0, 0.0, p.at("b").get<double>(), 0.0, p.at("c").get<double>(), 0.0));
      return distributed_delay_drift(DelayMeasure(std::move(atoms)), base, config.tau);
    }
    throw ConfigError("unknown family '" + eq.family + "'");
  });
  if (eq.truncation_radius) out = make_truncated(out, *eq.truncation_radius);
  return out;
}

InitialData build_initial(const RunConfig& config) {
  if (config.initial.kind == "affine") return InitialData::affine(config.initial.value, config.initial.slope);
  return InitialData::constant(config.initial.value);
}

std::uint64_t require_seed(const RunConfig& config) {
  if (!config.seed) fail("seed", "is required (set it in the config or pass --seed)");
  return *config.seed;
}

namespace {

void check_initial_dim(const RunConfig& config, const CoefficientSet& c) {
  if (config.initial.value.size() != c.dim) {
    fail("initial.value", "has " + std::to_string(config.initial.value.size()) + " entries, the equation has dimension " +
                              std::to_string(c.dim));
  }
}

}  // namespace

EmConfig simulate_config(const RunConfig& config) {
  EmConfig cfg;
  cfg.coefficients = build_coefficients(config);
  check_initial_dim(config, cfg.coefficients);
  cfg.initial = build_initial(config);
  cfg.tau = config.tau;
  cfg.horizon = config.horizon;
  cfg.lags = config.simulate.lags;
  cfg.steps = config.simulate.steps;
  if (cfg.lags == 0) fail("simulate.lags", "is required and must be at least 1");
  if (cfg.steps == 0) fail("simulate.steps", "is required and must be at least 1");
  keyed("simulate.lags/simulate.steps", [&] {
    cfg.validate();
    return 0;
  });
  return cfg;
}

StudyConfig study_config(const RunConfig& config) {
  StudyConfig s;
  s.coefficients = build_coefficients(config);
  check_initial_dim(config, s.coefficients);
  s.initial = build_initial(config);
  s.tau = config.tau;
  s.horizon = config.horizon;
  s.intensity = config.intensity;
  s.steps = config.study.deltas;
  if (s.steps.empty()) fail("study.deltas", "is required and must not be empty");
  s.moments = config.study.moments;
  s.num_paths = config.study.paths;
  s.master_seed = require_seed(config);
  s.workers = config.workers;
  s.reference.refinement_ratio = config.study.refinement_ratio;
  if (config.study.reference == "exact") {
    if (config.equation.family != "geometric") {
      fail("study.reference", "an exact reference needs the geometric family");
    }
    if (config.initial.kind != "constant") fail("study.reference", "an exact reference needs constant initial data");
    s.reference.kind = ReferenceSpec::Kind::exact;
    s.reference.x0 = config.initial.value[0];
    s.reference.a = config.equation.params.at("a").get<double>();
    s.reference.b = config.equation.params.at("b").get<double>();
    s.reference.c = config.equation.params.at("c").get<double>();
  } else {
    s.reference.kind = ReferenceSpec::Kind::fine_em;
  }
  s.validate();
  return s;
}

}  // namespace sfde
