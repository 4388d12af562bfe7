#include "sfde/solver.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <ostream>

#include "sfde/io.hpp"

namespace sfde {
namespace {

// base + f dt + g (B(t1) - B(t0)) + h (N(t1) - N(t0)), in one fixed
// evaluation order shared by every caller so that equal inputs give equal bits.
void em_update(std::span<const double> base, const CoefficientValues& c, std::size_t m, double dt,
               const NoiseLattice& noise, std::size_t k0, std::size_t k1, std::span<double> out) {
  const double jumps = static_cast<double>(noise.count_at(k1) - noise.count_at(k0));
  for (std::size_t i = 0; i < base.size(); ++i) {
    double v = base[i] + c.drift[i] * dt;
    for (std::size_t j = 0; j < m; ++j) v += c.diffusion[i * m + j] * noise.brownian_change(k0, k1, j);
    v += c.jump[i] * jumps;
    out[i] = v;
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

SegmentView window(const PathGrid& path, const SegmentGrid& grid, std::size_t first) {
  return SegmentView(grid, path.values().subspan(first * path.dim(), grid.node_count() * path.dim()));
}

// History nodes i = 0..lags hold xi at -(lags - i) cells of `noise`.
void fill_history(PathGrid& path, const InitialData& xi, const NoiseLattice& noise, std::size_t lags) {
  for (std::size_t i = 0; i <= lags; ++i) {
    const double theta = i == lags ? 0.0 : -noise.duration(lags - i);
    xi.sampler(theta, path.node(i));
    if (!all_finite(path.node(i))) throw NumericalError("initial data is not finite at theta = " + format_double(theta));
  }
}

void check_noise(const EmConfig& cfg, const NoiseLattice& noise, double step, std::size_t steps) {
  if (noise.brownian_dim() != cfg.coefficients.brownian_dim) {
    throw ConfigError("noise has " + std::to_string(noise.brownian_dim()) + " Brownian components, coefficients expect " +
                      std::to_string(cfg.coefficients.brownian_dim));
  }
  if (std::abs(noise.step() - step) > 1e-9 * step) {
    throw ConfigError("noise step " + format_double(noise.step()) + " does not match step " + format_double(step));
  }
  if (noise.cells() < steps) throw ConfigError("noise horizon is shorter than the simulation horizon");
}

double sup_difference(const PathGrid& a, const PathGrid& b) {
  double best = 0.0;
  for (std::size_t i = a.history(); i < a.size(); ++i) {
    double sum = 0.0;
    for (std::size_t d = 0; d < a.dim(); ++d) {
      const double diff = a.node(i)[d] - b.node(i)[d];
      sum += diff * diff;
    }
    best = std::max(best, std::sqrt(sum));
  }
  return best;
}

}  // namespace

State InitialData::at(double theta) const {
  State out(dim);
  sampler(theta, out);
  return out;
}

InitialData InitialData::constant(State value) {
  const std::size_t n = value.size();
  std::string description = "constant";
  return InitialData{n,
                     [value = std::move(value)](double, std::span<double> out) {
                       std::copy(value.begin(), value.end(), out.begin());
                     },
                     description};
}

InitialData InitialData::affine(State value, State slope) {
  if (value.size() != slope.size()) throw ConfigError("affine initial data: value and slope differ in dimension");
  const std::size_t n = value.size();
  return InitialData{n,
                     [value = std::move(value), slope = std::move(slope)](double theta, std::span<double> out) {
                       for (std::size_t i = 0; i < value.size(); ++i) out[i] = value[i] + theta * slope[i];
                     },
                     "affine"};
}

double initial_modulus(const InitialData& xi, double tau, double u, std::size_t nodes) {
  if (nodes == 0) throw ConfigError("initial_modulus: need at least one interval");
  const double h = tau / static_cast<double>(nodes);
  std::vector<State> samples;
  samples.reserve(nodes + 1);
  for (std::size_t i = 0; i <= nodes; ++i) samples.push_back(xi.at(i == nodes ? 0.0 : -tau + static_cast<double>(i) * h));
  const auto window_nodes = static_cast<std::size_t>(std::floor(u / h + 1e-9));
  double best = 0.0;
  for (std::size_t i = 0; i <= nodes; ++i) {
    for (std::size_t j = i + 1; j <= std::min(nodes, i + window_nodes); ++j) {
      double sum = 0.0;
      for (std::size_t d = 0; d < xi.dim; ++d) sum += (samples[i][d] - samples[j][d]) * (samples[i][d] - samples[j][d]);
      best = std::max(best, std::sqrt(sum));
    }
  }
  return best;
}

PathGrid::PathGrid(double step, std::size_t history, std::size_t steps, std::size_t dim)
    : step_(step), history_(history), steps_(steps), dim_(dim), values_((history + steps + 1) * dim, 0.0) {}

void EmConfig::validate() const {
  if (!coefficients.drift || !coefficients.diffusion || !coefficients.jump) {
    throw ConfigError("coefficient set is incomplete");
  }
  if (!initial.sampler) throw ConfigError("initial data has no sampler");
  if (initial.dim != coefficients.dim) {
    throw ConfigError("initial data has dimension " + std::to_string(initial.dim) + ", coefficients expect " +
                      std::to_string(coefficients.dim));
  }
  if (!(tau > 0.0) || !(horizon > 0.0)) throw ConfigError("tau and horizon must be positive");
  if (lags < 1 || steps < 1) throw ConfigError("lags and steps must be at least 1");
  const double lhs = tau * static_cast<double>(steps);
  const double rhs = horizon * static_cast<double>(lags);
  if (std::abs(lhs - rhs) > 1e-12 * std::max(lhs, rhs)) {
    throw ConfigError("step mismatch: tau / lags = " + format_double(tau / static_cast<double>(lags)) +
                      " but horizon / steps = " + format_double(horizon / static_cast<double>(steps)));
  }
}

EmConfig EmConfig::with_step(double delta) const {
  EmConfig out = *this;
  out.lags = exact_ratio(tau, delta, "tau / step");
  out.steps = exact_ratio(horizon, delta, "horizon / step");
  return out;
}

PathGrid em_discrete(const EmConfig& cfg, const NoiseLattice& noise) {
  cfg.validate();
  check_noise(cfg, noise, cfg.step(), cfg.steps);
  const std::size_t n = cfg.coefficients.dim;
  const std::size_t m = cfg.coefficients.brownian_dim;
  const std::size_t lags = cfg.lags;
  const SegmentGrid grid = cfg.segment_grid();
  const double dt = noise.duration(1);

  PathGrid path(dt, lags, cfg.steps, n);
  fill_history(path, cfg.initial, noise, lags);

  CoefficientValues values(cfg.coefficients);
#ifndef NDEBUG
  double running_max = 0.0;
  for (std::size_t i = 0; i <= lags; ++i) running_max = std::max(running_max, euclidean_norm(path.node(i)));
#endif
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    const SegmentView seg = window(path, grid, k);
#ifndef NDEBUG
    assert(seg.sup_norm() <= running_max);
#endif
    evaluate(cfg.coefficients, seg, values);
    auto next = path.node(lags + k + 1);
    em_update(path.node(lags + k), values, m, dt, noise, k, k + 1, next);
    if (!all_finite(next)) {
      throw NumericalError("EM produced a non-finite state at step " + std::to_string(k + 1) + " (t = " +
                           format_double(noise.duration(k + 1)) + ")");
    }
#ifndef NDEBUG
    running_max = std::max(running_max, euclidean_norm(next));
#endif
  }
  return path;
}

PathGrid em_dense_eval(const PathGrid& coarse, const EmConfig& cfg, const NoiseLattice& fine_noise) {
  cfg.validate();
  if (coarse.history() != cfg.lags || coarse.steps() != cfg.steps || coarse.dim() != cfg.coefficients.dim) {
    throw ConfigError("dense evaluation: coarse path does not match the configuration");
  }
  const std::size_t r = exact_ratio(coarse.step(), fine_noise.step(), "coarse step / fine step");
  check_noise(cfg, fine_noise, fine_noise.step(), cfg.steps * r);
  if (std::abs(fine_noise.duration(r) - coarse.step()) > 1e-12 * coarse.step()) {
    throw ConfigError("dense evaluation: coarse step is not a multiple of the fine step");
  }
  const std::size_t n = cfg.coefficients.dim;
  const std::size_t m = cfg.coefficients.brownian_dim;
  const std::size_t lags = cfg.lags;
  const SegmentGrid grid = cfg.segment_grid();

  PathGrid out(fine_noise.step(), lags * r, cfg.steps * r, n);
  fill_history(out, cfg.initial, fine_noise, lags * r);

  CoefficientValues values(cfg.coefficients);
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    const auto anchor = coarse.node(lags + k);
    evaluate(cfg.coefficients, window(coarse, grid, k), values);
    const std::size_t first = k * r;
    std::copy(anchor.begin(), anchor.end(), out.node(lags * r + first).begin());
    for (std::size_t j = 1; j <= r; ++j) {
      em_update(anchor, values, m, fine_noise.duration(j), fine_noise, first, first + j,
                out.node(lags * r + first + j));
    }
  }
  return out;
}

PathGrid exact_linear_jump_path(double x0, double a, double b, double c, const NoiseLattice& lattice, double tau) {
  if (b != 0.0 && lattice.brownian_dim() < 1) throw ConfigError("exact path: lattice carries no Brownian motion");
  const std::size_t history = tau > 0.0 ? exact_ratio(tau, lattice.step(), "tau / lattice step") : 0;
  PathGrid out(lattice.step(), history, lattice.cells(), 1);
  for (std::size_t i = 0; i < history; ++i) out.node(i)[0] = x0;
  const double drift = a - 0.5 * b * b;
  for (std::size_t k = 0; k <= lattice.cells(); ++k) {
    const double t = lattice.duration(k);
    const double w = lattice.brownian_dim() > 0 ? lattice.brownian_at(k)[0] : 0.0;
    out.node(history + k)[0] =
        x0 * std::exp(drift * t + b * w) * std::pow(1.0 + c, static_cast<double>(lattice.count_at(k)));
  }
  return out;
}

PicardResult picard_solve(const EmConfig& cfg, const NoiseLattice& fine_noise, std::size_t iterations) {
  if (!cfg.coefficients.drift || !cfg.initial.sampler) throw ConfigError("picard: incomplete configuration");
  if (cfg.initial.dim != cfg.coefficients.dim) throw ConfigError("picard: initial data dimension mismatch");
  if (fine_noise.brownian_dim() != cfg.coefficients.brownian_dim) throw ConfigError("picard: Brownian dimension mismatch");
  const double h = fine_noise.step();
  const std::size_t lags = exact_ratio(cfg.tau, h, "tau / lattice step");
  const std::size_t steps = exact_ratio(cfg.horizon, h, "horizon / lattice step");
  if (steps > fine_noise.cells()) throw ConfigError("picard: noise horizon is shorter than the horizon");
  const std::size_t n = cfg.coefficients.dim;
  const std::size_t m = cfg.coefficients.brownian_dim;
  const SegmentGrid grid{cfg.tau, lags, n};

  PicardResult result;
  PathGrid first(h, lags, steps, n);
  fill_history(first, cfg.initial, fine_noise, lags);
  for (std::size_t i = lags + 1; i < first.size(); ++i) {
    std::copy(first.node(lags).begin(), first.node(lags).end(), first.node(i).begin());
  }
  result.iterates.push_back(std::move(first));

  CoefficientValues values(cfg.coefficients);
  int rising = 0;
  for (std::size_t it = 1; it <= iterations; ++it) {
    const PathGrid& prev = result.iterates.back();
    PathGrid next(h, lags, steps, n);
    std::copy(prev.values().begin(), prev.values().begin() + static_cast<std::ptrdiff_t>((lags + 1) * n),
              next.values().begin());
    for (std::size_t i = 0; i < steps; ++i) {
      evaluate(cfg.coefficients, window(prev, grid, i), values);
      em_update(next.node(lags + i), values, m, h, fine_noise, i, i + 1, next.node(lags + i + 1));
      if (!all_finite(next.node(lags + i + 1))) {
        throw NumericalError("picard iterate " + std::to_string(it) + " is not finite at step " + std::to_string(i + 1));
      }
    }
    const double d = sup_difference(next, prev);
    if (!result.differences.empty() && d > result.differences.back()) {
      ++rising;
    } else {
      rising = 0;
    }
    result.differences.push_back(d);
    result.iterates.push_back(std::move(next));
    if (rising >= 3) {
      result.diverged = true;
      break;
    }
  }
  return result;
}

double picard_noise_floor(const PicardResult& result) {
  if (result.iterates.empty()) return 0.0;
  const PathGrid& last = result.iterates.back();
  double biggest = 0.0;
  for (std::size_t i = 0; i < last.size(); ++i) biggest = std::max(biggest, euclidean_norm(last.node(i)));
  return 16.0 * std::numeric_limits<double>::epsilon() * biggest;
}

std::size_t picard_monotone_from(std::span<const double> differences, double floor) {
  std::size_t settled = differences.size();
  while (settled > 0 && differences[settled - 1] <= floor) --settled;
  if (settled == 0) return 0;
  std::size_t n0 = settled - 1;
  while (n0 > 0 && differences[n0 - 1] > differences[n0]) --n0;
  return n0;
}

void write_path_csv(const PathGrid& path, std::ostream& os) {
  os << 't';
  for (std::size_t d = 1; d <= path.dim(); ++d) os << ",x_" << d;
  os << '\n';
  for (std::size_t i = 0; i < path.size(); ++i) {
    os << format_double(path.time(i));
    for (double v : path.node(i)) os << ',' << format_double(v);
    os << '\n';
  }
}

}  // namespace sfde
