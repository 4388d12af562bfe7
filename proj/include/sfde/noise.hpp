#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfde {

/// Invalid study or lattice parameters.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Returns round(numerator / denominator) when the ratio is an integer to
/// within 1e-9 relative, otherwise throws ConfigError mentioning `what`.
std::size_t exact_ratio(double numerator, double denominator, const std::string& what);

/**
 * One realization of an m-dimensional Brownian motion B and a Poisson process
 * N of intensity lambda on [0, T], sampled on a uniform grid of `cells()`
 * cells.
 *
 * B and N are stored as their values at the grid nodes, so the increment over
 * any union of cells is a single difference and coarsening is subsampling.
 * Times are integer multiples of `base_step()`, the step of the lattice the
 * realization was generated on; a lattice coarsened by r has stride r.
 */
class NoiseLattice {
 public:
  /// Builds a lattice from explicit fine increments (row-major cells x m)
  /// and per-cell counts. `jump_times` must be consistent with `counts`.
  static NoiseLattice from_increments(double horizon, double step, std::size_t brownian_dim, double intensity,
                                      std::span<const double> brownian_increments,
                                      std::span<const std::int64_t> counts, std::vector<double> jump_times);

  double horizon() const noexcept { return horizon_; }
  double base_step() const noexcept { return base_step_; }
  std::size_t stride() const noexcept { return stride_; }
  double step() const noexcept { return duration(1); }
  std::size_t cells() const noexcept { return cells_; }
  std::size_t brownian_dim() const noexcept { return brownian_dim_; }
  double intensity() const noexcept { return intensity_; }

  /// Length of `cells` cells of this lattice.
  double duration(std::size_t cells) const noexcept {
    return static_cast<double>(cells * stride_) * base_step_;
  }

  /// B at node k (k = 0..cells), m entries.
  std::span<const double> brownian_at(std::size_t k) const noexcept {
    return {brownian_.data() + k * brownian_dim_, brownian_dim_};
  }
  /// B(t_k1) - B(t_k0), component j.
  double brownian_change(std::size_t k0, std::size_t k1, std::size_t j) const noexcept {
    return brownian_[k1 * brownian_dim_ + j] - brownian_[k0 * brownian_dim_ + j];
  }
  double brownian_increment(std::size_t k, std::size_t j) const noexcept { return brownian_change(k, k + 1, j); }
  /// All increments, row-major cells x m.
  std::vector<double> brownian_increments() const;

  /// N at node k.
  std::int64_t count_at(std::size_t k) const noexcept { return counts_[k]; }
  std::int64_t poisson_count(std::size_t k) const noexcept { return counts_[k + 1] - counts_[k]; }
  std::vector<std::int64_t> poisson_counts() const;

  /// Sorted event times in (0, T].
  const std::vector<double>& jump_times() const noexcept { return jump_times_; }

  bool operator==(const NoiseLattice&) const = default;

 private:
  friend NoiseLattice generate_lattice(std::uint64_t, std::uint64_t, double, double, std::size_t, double);
  friend NoiseLattice coarsen(const NoiseLattice&, std::size_t);

  NoiseLattice() = default;

  double horizon_ = 0.0;
  double base_step_ = 0.0;
  std::size_t stride_ = 1;
  std::size_t cells_ = 0;
  std::size_t brownian_dim_ = 0;
  double intensity_ = 0.0;
  std::vector<double> brownian_;      // (cells + 1) x m
  std::vector<std::int64_t> counts_;  // cells + 1
  std::vector<double> jump_times_;
};

/// Random channels of one path's stream.
enum class NoiseChannel : std::uint32_t { brownian = 0, poisson = 1, sampling = 2 };

/// Draws the noise of path `path_index`. The result depends only on the
/// arguments. Throws ConfigError unless T / step is an integer and lambda >= 0.
NoiseLattice generate_lattice(std::uint64_t master_seed, std::uint64_t path_index, double horizon, double step,
                              std::size_t brownian_dim, double intensity);

/// Lattice on the grid of every r-th node. Throws ConfigError unless r
/// divides cells().
NoiseLattice coarsen(const NoiseLattice& lattice, std::size_t factor);

/// E[X^p] for X ~ Poisson(mean), as sum_i S(p, i) mean^i with Stirling
/// numbers of the second kind.
double poisson_increment_moment(double mean, unsigned p);

/// E|Z|^p for Z ~ N(0, variance).
double gaussian_abs_moment(double variance, double p);

/// One empirical-versus-exact moment comparison.
struct MomentCheck {
  std::string name;
  double empirical = 0.0;
  double expected = 0.0;
  double std_error = 0.0;
  double tolerance_se = 4.0;
  bool passed() const noexcept;
};

/// Compares per-cell increment moments of `lattice` against exact values:
/// E|dB|^p and E[dN^p] for each p in `orders`, plus E[dB] = 0. Uses the
/// first Brownian component.
std::vector<MomentCheck> check_increment_moments(const NoiseLattice& lattice, std::span<const unsigned> orders,
                                                 double tolerance_se = 4.0);

}  // namespace sfde
