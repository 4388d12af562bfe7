#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfde/coefficients.hpp"
#include "sfde/noise.hpp"
#include "sfde/segments.hpp"

namespace sfde {

/// Non-finite state or a diverging iteration.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The initial path xi on [-tau, 0].
struct InitialData {
  std::size_t dim = 1;
  std::function<void(double, std::span<double>)> sampler;
  std::string description;

  State at(double theta) const;

  static InitialData constant(State value);
  /// xi(theta) = value + theta * slope.
  static InitialData affine(State value, State slope);
};

/// Largest |xi(s) - xi(t)| over grid pairs in [-tau, 0] with |t - s| <= u,
/// sampled on `nodes` + 1 points. An empirical modulus of continuity.
double initial_modulus(const InitialData& xi, double tau, double u, std::size_t nodes);

/// Path values at t = i * step for i = -history .. steps.
class PathGrid {
 public:
  PathGrid(double step, std::size_t history, std::size_t steps, std::size_t dim);

  double step() const noexcept { return step_; }
  std::size_t history() const noexcept { return history_; }
  std::size_t steps() const noexcept { return steps_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return history_ + steps_ + 1; }

  /// Node by storage index 0..size()-1 (index history() is t = 0).
  std::span<double> node(std::size_t index) noexcept { return {values_.data() + index * dim_, dim_}; }
  std::span<const double> node(std::size_t index) const noexcept { return {values_.data() + index * dim_, dim_}; }
  /// Node at time tick k, -history <= k <= steps.
  std::span<const double> at_tick(std::ptrdiff_t k) const noexcept {
    return node(static_cast<std::size_t>(k + static_cast<std::ptrdiff_t>(history_)));
  }
  double time(std::size_t index) const noexcept {
    return static_cast<double>(static_cast<std::ptrdiff_t>(index) - static_cast<std::ptrdiff_t>(history_)) * step_;
  }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  bool operator==(const PathGrid&) const = default;

 private:
  double step_;
  std::size_t history_;
  std::size_t steps_;
  std::size_t dim_;
  std::vector<double> values_;
};

/// One Euler-Maruyama discretization: step tau / lags = horizon / steps.
struct EmConfig {
  CoefficientSet coefficients;
  InitialData initial;
  double tau = 1.0;
  double horizon = 1.0;
  std::size_t lags = 1;
  std::size_t steps = 1;

  double step() const noexcept { return horizon / static_cast<double>(steps); }
  SegmentGrid segment_grid() const { return SegmentGrid{tau, lags, coefficients.dim}; }

  /// Throws ConfigError unless tau / lags == horizon / steps and the parts
  /// have matching dimensions.
  void validate() const;

  /// Same equation with step `delta`; both tau and horizon must be multiples of it.
  EmConfig with_step(double delta) const;
};

/// Discrete EM recursion
///   y((k+1)D) = y(kD) + f(y_kD) D + g(y_kD) dB_k + h(y_kD) dN_k
/// with y(kD) = xi(kD) for -lags <= k <= 0 and y_kD the interpolated window
/// of nodes (k-lags)..k. `noise` must have the configuration's step.
PathGrid em_discrete(const EmConfig& cfg, const NoiseLattice& noise);

/// The continuous-time EM solution on the grid of `fine_noise`: coefficients
/// are frozen at the left coarse node and integrated against the actual fine
/// increments. History nodes are xi; coarse nodes reproduce `coarse` exactly.
PathGrid em_dense_eval(const PathGrid& coarse, const EmConfig& cfg, const NoiseLattice& fine_noise);

/// Closed form of dx = a x dt + b x dB + c x dN on the lattice grid:
/// x0 exp((a - b^2/2) t + b B(t)) (1 + c)^N(t). `tau` adds that much constant
/// history.
PathGrid exact_linear_jump_path(double x0, double a, double b, double c, const NoiseLattice& lattice,
                                double tau = 0.0);

struct PicardResult {
  std::vector<PathGrid> iterates;   ///< x^0 .. x^n on the lattice grid
  std::vector<double> differences;  ///< d_k = sup_[0,T] |x^{k+1} - x^k|
  bool diverged = false;            ///< d_k grew three times in a row
};

/// Picard iterates x^n(t) = xi(0) + int f(x^{n-1}) ds + int g(x^{n-1}) dB + int h(x^{n-1}) dN,
/// with left-endpoint sums on the lattice grid. `cfg.tau` must be a multiple
/// of the lattice step.
PicardResult picard_solve(const EmConfig& cfg, const NoiseLattice& fine_noise, std::size_t iterations);

/// Differences at or below this are rounding noise: 16 eps times the largest
/// node norm of the final iterate.
double picard_noise_floor(const PicardResult& result);

/// Smallest n0 with d_n0 > d_n0+1 > ... for as long as d stays above `floor`,
/// every later difference being at or below it. Rounding noise under the floor
/// does not break monotonicity.
std::size_t picard_monotone_from(std::span<const double> differences, double floor);

/// CSV with header `t,x_1..x_n`, times as tick * step, all numbers with 17
/// significant digits.
void write_path_csv(const PathGrid& path, std::ostream& os);

}  // namespace sfde
