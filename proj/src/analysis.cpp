#include "sfde/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <sstream>
#include <thread>

#include "sfde/io.hpp"
#include "sfde/philox.hpp"

namespace sfde {
namespace {

double max_node_norm(const PathGrid& path, std::size_t first) {
  double best = 0.0;
  for (std::size_t i = first; i < path.size(); ++i) best = std::max(best, euclidean_norm(path.node(i)));
  return best;
}

bool is_power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

EmConfig base_config(const StudyConfig& study) {
  EmConfig cfg;
  cfg.coefficients = study.coefficients;
  cfg.initial = study.initial;
  cfg.tau = study.tau;
  cfg.horizon = study.horizon;
  return cfg;
}

// Runs `body` and prefixes any solver or noise failure with the path and step.
template <typename Body>
auto with_context(std::size_t path, double delta, Body&& body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    throw NumericalError("path " + std::to_string(path) + ", delta " + format_double(delta) + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError("path " + std::to_string(path) + ", delta " + format_double(delta) + ": " + e.what());
  }
}

}  // namespace

double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

MeanStat mean_and_std_error(std::span<const double> values) {
  MeanStat out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = compensated_sum(values) / n;
  if (values.size() > 1) {
    std::vector<double> sq(values.size());
    std::transform(values.begin(), values.end(), sq.begin(), [&](double v) { return (v - out.mean) * (v - out.mean); });
    out.std_error = std::sqrt(compensated_sum(sq) / (n - 1.0) / n);
  }
  return out;
}

double sup_gap(const PathGrid& reference, const PathGrid& approx) {
  if (reference.dim() != approx.dim() || reference.steps() != approx.steps() ||
      std::abs(reference.step() - approx.step()) > 1e-12 * reference.step()) {
    throw ConfigError("strong error: reference and approximation live on different grids");
  }
  double best = 0.0;
  for (std::size_t k = 0; k <= reference.steps(); ++k) {
    const auto x = reference.at_tick(static_cast<std::ptrdiff_t>(k));
    const auto y = approx.at_tick(static_cast<std::ptrdiff_t>(k));
    double sum = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) sum += (x[d] - y[d]) * (x[d] - y[d]);
    best = std::max(best, std::sqrt(sum));
  }
  return best;
}

double strong_error(const PathGrid& reference, const PathGrid& approx, double p) {
  return std::pow(sup_gap(reference, approx), p);
}

ErrorStat aggregate_error(std::span<const double> sup_gaps, double p, double delta) {
  std::vector<double> powered(sup_gaps.size());
  std::transform(sup_gaps.begin(), sup_gaps.end(), powered.begin(), [p](double g) { return std::pow(g, p); });
  const MeanStat stat = mean_and_std_error(powered);
  return ErrorStat{p, delta, sup_gaps.size(), stat.mean, stat.std_error, std::pow(stat.mean, 1.0 / p)};
}

MeanStat moment_bound_stat(std::span<const PathGrid> paths, double p) {
  std::vector<double> values;
  values.reserve(paths.size());
  for (const auto& path : paths) values.push_back(std::pow(max_node_norm(path, 0), p));
  return mean_and_std_error(values);
}

double moment_bound_estimate(std::span<const PathGrid> paths, double p) { return moment_bound_stat(paths, p).mean; }

RateEstimate fit_rate(std::span<const RateEstimate::Point> points) {
  if (points.size() < 2) throw ConfigError("rate fit needs at least two points");
  for (const auto& pt : points) {
    if (!(pt.delta > 0.0)) throw ConfigError("rate fit: step sizes must be positive");
    if (!(pt.error > 0.0) || !std::isfinite(pt.error)) {
      throw ConfigError("rate fit: error " + format_double(pt.error) + " at delta " + format_double(pt.delta) +
                        " is not positive; the estimate is below the Monte Carlo noise floor, use more paths");
    }
  }
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& pt : points) {
    mx += std::log(pt.delta);
    my += std::log(pt.error);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& pt : points) {
    const double dx = std::log(pt.delta) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(pt.error) - my);
  }
  if (!(sxx > 0.0)) throw ConfigError("rate fit: step sizes must not all be equal");
  RateEstimate out;
  out.points.assign(points.begin(), points.end());
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  double rss = 0.0;
  for (const auto& pt : points) {
    const double r = std::log(pt.error) - (out.intercept + out.slope * std::log(pt.delta));
    rss += r * r;
  }
  out.residual_norm = std::sqrt(rss);
  if (points.size() > 2) out.slope_std_error = std::sqrt(rss / (n - 2.0) / sxx);
  return out;
}

std::vector<InterpSample> draw_interp_samples(std::uint64_t seed, std::uint64_t path_index, std::size_t count,
                                              std::size_t horizon_cells, std::size_t tau_cells) {
  if (horizon_cells == 0) throw ConfigError("interpolation samples need a positive horizon");
  PhiloxStream rng(seed, path_index, static_cast<std::uint32_t>(NoiseChannel::sampling));
  std::uniform_int_distribution<std::size_t> s_dist(0, horizon_cells - 1);
  std::uniform_int_distribution<std::size_t> theta_dist(0, tau_cells);
  std::vector<InterpSample> out(count);
  for (auto& sample : out) {
    sample.s_cells = s_dist(rng);
    sample.theta_cells = theta_dist(rng);
  }
  return out;
}

double segment_interp_defect(const EmConfig& cfg, const NoiseLattice& fine_noise, double p,
                             std::span<const InterpSample> samples) {
  const std::size_t r = exact_ratio(cfg.step(), fine_noise.step(), "step / fine step");
  const NoiseLattice coarse_noise = coarsen(fine_noise, r);
  const PathGrid coarse = em_discrete(cfg, coarse_noise);
  const PathGrid dense = em_dense_eval(coarse, cfg, fine_noise);
  const SegmentGrid grid = cfg.segment_grid();
  const std::size_t n = coarse.dim();
  const std::size_t tau_cells = cfg.lags * r;

  State windowed(n);
  double total = 0.0;
  for (const auto& sample : samples) {
    if (sample.s_cells >= cfg.steps * r || sample.theta_cells > tau_cells) {
      throw ConfigError("interpolation sample outside [0, T) x [-tau, 0]");
    }
    const std::size_t k = sample.s_cells / r;
    const SegmentView seg(grid, coarse.values().subspan(k * n, grid.node_count() * n));
    const double theta = std::max(-cfg.tau, -fine_noise.duration(sample.theta_cells));
    seg.eval(theta, windowed);
    const auto actual = dense.at_tick(static_cast<std::ptrdiff_t>(sample.s_cells) -
                                      static_cast<std::ptrdiff_t>(sample.theta_cells));
    double sum = 0.0;
    for (std::size_t d = 0; d < n; ++d) sum += (actual[d] - windowed[d]) * (actual[d] - windowed[d]);
    total += std::pow(std::sqrt(sum), p);
  }
  return total;
}

MeanStat segment_interp_error(const EmConfig& cfg, std::span<const NoiseLattice> noise, double p,
                              std::span<const InterpSample> samples) {
  if (samples.empty()) throw ConfigError("segment interpolation error needs at least one sample");
  std::vector<double> per_path;
  per_path.reserve(noise.size());
  for (const auto& lattice : noise) {
    per_path.push_back(segment_interp_defect(cfg, lattice, p, samples) / static_cast<double>(samples.size()));
  }
  return mean_and_std_error(per_path);
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> first_failure{count};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || i > first_failure.load()) return;
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        std::size_t seen = first_failure.load();
        while (i < seen && !first_failure.compare_exchange_weak(seen, i)) {
        }
      }
    }
  };
  std::vector<std::jthread> pool;
  const std::size_t threads = std::min(workers, count);
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void StudyConfig::validate() const {
  if (steps.empty()) throw ConfigError("study: steps must not be empty");
  if (moments.empty()) throw ConfigError("study: moments must not be empty");
  for (double p : moments) {
    if (!(p >= 2.0) || !std::isfinite(p)) throw ConfigError("study: every moment order p must be >= 2");
  }
  if (num_paths < 1) throw ConfigError("study: paths must be at least 1");
  if (!(intensity >= 0.0)) throw ConfigError("study: intensity must be >= 0");
  if (reference.kind == ReferenceSpec::Kind::fine_em && reference.refinement_ratio < 8) {
    throw ConfigError("study: refinement_ratio must be at least 8 for a fine-EM reference");
  }
  if (reference.refinement_ratio < 1) throw ConfigError("study: refinement_ratio must be at least 1");
  if (reference.kind == ReferenceSpec::Kind::exact &&
      (coefficients.dim != 1 || coefficients.brownian_dim != 1)) {
    throw ConfigError("study: the exact reference needs a scalar equation with one Brownian motion");
  }
  const double finest = *std::min_element(steps.begin(), steps.end());
  for (double delta : steps) {
    if (!(delta > 0.0)) throw ConfigError("study: steps must be positive");
    if (!(delta < 1.0)) throw ConfigError("study: steps must lie in (0, 1)");
    if (!is_power_of_two(exact_ratio(delta, finest, "study step / finest step"))) {
      throw ConfigError("study: step " + format_double(delta) + " is not a power-of-two multiple of the finest step");
    }
    exact_ratio(tau, delta, "study tau / step " + format_double(delta));
    exact_ratio(horizon, delta, "study horizon / step " + format_double(delta));
  }
  EmConfig cfg = base_config(*this).with_step(finest);
  cfg.validate();
}

double StudyConfig::fine_step() const {
  return *std::min_element(steps.begin(), steps.end()) / static_cast<double>(reference.refinement_ratio);
}

StudyReport convergence_study(const StudyConfig& study) {
  study.validate();
  const EmConfig base = base_config(study);
  const double fine = study.fine_step();
  const EmConfig fine_cfg = base.with_step(fine);
  const std::size_t num_steps = study.steps.size();
  const auto& ref = study.reference;

  std::vector<double> gaps(study.num_paths * num_steps);
  std::vector<double> path_max(study.num_paths);

  parallel_for(study.num_paths, study.workers, [&](std::size_t path) {
    const NoiseLattice lattice = with_context(path, fine, [&] {
      return generate_lattice(study.master_seed, path, study.horizon, fine, study.coefficients.brownian_dim,
                              study.intensity);
    });
    const PathGrid reference = with_context(path, fine, [&] {
      return ref.kind == ReferenceSpec::Kind::exact ? exact_linear_jump_path(ref.x0, ref.a, ref.b, ref.c, lattice)
                                                    : em_discrete(fine_cfg, lattice);
    });
    double biggest = max_node_norm(reference, 0);
    for (std::size_t s = 0; s < num_steps; ++s) {
      const double delta = study.steps[s];
      with_context(path, delta, [&] {
        const EmConfig cfg = base.with_step(delta);
        const std::size_t r = exact_ratio(delta, fine, "step / fine step");
        const PathGrid coarse = em_discrete(cfg, coarsen(lattice, r));
        const PathGrid dense = em_dense_eval(coarse, cfg, lattice);
        gaps[path * num_steps + s] = sup_gap(reference, dense);
        biggest = std::max(biggest, max_node_norm(coarse, 0));
        return 0;
      });
    }
    path_max[path] = biggest;
  });

  StudyReport report;
  report.fine_step = fine;
  report.max_path_sup = *std::max_element(path_max.begin(), path_max.end());
  std::vector<double> column(study.num_paths);
  for (double p : study.moments) {
    RateFit fit;
    fit.p = p;
    std::vector<RateEstimate::Point> root_points, mean_points;
    for (std::size_t s = 0; s < num_steps; ++s) {
      for (std::size_t path = 0; path < study.num_paths; ++path) column[path] = gaps[path * num_steps + s];
      const ErrorStat stat = aggregate_error(column, p, study.steps[s]);
      report.rows.push_back(stat);
      root_points.push_back({stat.delta, stat.root_error});
      mean_points.push_back({stat.delta, stat.mean_sup_p});
    }
    if (num_steps < 2) {
      fit.warning = "rate fit skipped: a single step size gives no slope";
    } else {
      try {
        fit.root = fit_rate(root_points);
        fit.mean = fit_rate(mean_points);
      } catch (const ConfigError& e) {
        fit.root.reset();
        fit.mean.reset();
        fit.warning = std::string("rate fit skipped: ") + e.what();
      }
    }
    report.rates.push_back(std::move(fit));
  }
  return report;
}

std::string study_report_csv(const StudyReport& report) {
  std::ostringstream os;
  os << "p,delta,num_paths,mean_sup_p,std_error,root_error\n";
  for (const auto& row : report.rows) {
    os << format_double(row.p) << ',' << format_double(row.delta) << ',' << row.num_paths << ','
       << format_double(row.mean_sup_p) << ',' << format_double(row.std_error) << ',' << format_double(row.root_error)
       << '\n';
  }
  return os.str();
}

std::string rate_csv(const StudyReport& report) {
  std::ostringstream os;
  os << "p,slope,intercept,residual_norm\n";
  for (const auto& fit : report.rates) {
    if (!fit.root) continue;
    os << format_double(fit.p) << ',' << format_double(fit.root->slope) << ',' << format_double(fit.root->intercept)
       << ',' << format_double(fit.root->residual_norm) << '\n';
  }
  return os.str();
}

std::vector<MomentBoundRow> moment_bound_study(const StudyConfig& study) {
  study.validate();
  const EmConfig base = base_config(study);
  const double fine = study.fine_step();
  const std::size_t num_steps = study.steps.size();
  const double p = study.moments.front();
  std::vector<double> sups(study.num_paths * num_steps);

  parallel_for(study.num_paths, study.workers, [&](std::size_t path) {
    const NoiseLattice lattice =
        generate_lattice(study.master_seed, path, study.horizon, fine, study.coefficients.brownian_dim, study.intensity);
    for (std::size_t s = 0; s < num_steps; ++s) {
      const double delta = study.steps[s];
      with_context(path, delta, [&] {
        const EmConfig cfg = base.with_step(delta);
        const PathGrid coarse = em_discrete(cfg, coarsen(lattice, exact_ratio(delta, fine, "step / fine step")));
        sups[path * num_steps + s] = std::pow(max_node_norm(em_dense_eval(coarse, cfg, lattice), 0), p);
        return 0;
      });
    }
  });

  std::vector<MomentBoundRow> rows;
  std::vector<double> column(study.num_paths);
  for (std::size_t s = 0; s < num_steps; ++s) {
    for (std::size_t path = 0; path < study.num_paths; ++path) column[path] = sups[path * num_steps + s];
    rows.push_back({study.steps[s], mean_and_std_error(column)});
  }
  return rows;
}

std::vector<InterpRow> segment_interp_study(const StudyConfig& study, double p, std::size_t samples_per_path) {
  study.validate();
  if (samples_per_path == 0) throw ConfigError("segment interpolation study needs samples");
  const EmConfig base = base_config(study);
  const double fine = study.fine_step();
  const std::size_t num_steps = study.steps.size();
  const std::size_t horizon_cells = exact_ratio(study.horizon, fine, "horizon / fine step");
  const std::size_t tau_cells = exact_ratio(study.tau, fine, "tau / fine step");
  std::vector<double> defects(study.num_paths * num_steps);

  parallel_for(study.num_paths, study.workers, [&](std::size_t path) {
    const NoiseLattice lattice =
        generate_lattice(study.master_seed, path, study.horizon, fine, study.coefficients.brownian_dim, study.intensity);
    const auto samples = draw_interp_samples(study.master_seed, path, samples_per_path, horizon_cells, tau_cells);
    for (std::size_t s = 0; s < num_steps; ++s) {
      const double delta = study.steps[s];
      defects[path * num_steps + s] = with_context(path, delta, [&] {
        return segment_interp_defect(base.with_step(delta), lattice, p, samples) /
               static_cast<double>(samples_per_path);
      });
    }
  });

  std::vector<InterpRow> rows;
  std::vector<double> column(study.num_paths);
  for (std::size_t s = 0; s < num_steps; ++s) {
    for (std::size_t path = 0; path < study.num_paths; ++path) column[path] = defects[path * num_steps + s];
    rows.push_back({study.steps[s], mean_and_std_error(column)});
  }
  return rows;
}

}  // namespace sfde
