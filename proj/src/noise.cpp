#include "sfde/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "sfde/philox.hpp"

namespace sfde {

std::size_t exact_ratio(double numerator, double denominator, const std::string& what) {
  if (!(denominator > 0.0) || !(numerator > 0.0) || !std::isfinite(numerator / denominator)) {
    throw ConfigError(what + ": both durations must be positive and finite");
  }
  const double ratio = numerator / denominator;
  const double nearest = std::nearbyint(ratio);
  if (nearest < 1.0 || std::abs(ratio - nearest) > 1e-9 * std::max(1.0, nearest)) {
    throw ConfigError(what + ": " + std::to_string(numerator) + " is not an integer multiple of " +
                      std::to_string(denominator));
  }
  return static_cast<std::size_t>(nearest);
}

NoiseLattice NoiseLattice::from_increments(double horizon, double step, std::size_t brownian_dim, double intensity,
                                           std::span<const double> brownian_increments,
                                           std::span<const std::int64_t> counts, std::vector<double> jump_times) {
  NoiseLattice out;
  out.cells_ = exact_ratio(horizon, step, "lattice horizon / step");
  if (brownian_increments.size() != out.cells_ * brownian_dim || counts.size() != out.cells_) {
    throw ConfigError("lattice: increment arrays do not match the number of cells");
  }
  out.horizon_ = horizon;
  out.base_step_ = step;
  out.brownian_dim_ = brownian_dim;
  out.intensity_ = intensity;
  out.brownian_.assign((out.cells_ + 1) * brownian_dim, 0.0);
  for (std::size_t k = 0; k < out.cells_; ++k) {
    for (std::size_t j = 0; j < brownian_dim; ++j) {
      out.brownian_[(k + 1) * brownian_dim + j] = out.brownian_[k * brownian_dim + j] + brownian_increments[k * brownian_dim + j];
    }
  }
  out.counts_.assign(out.cells_ + 1, 0);
  for (std::size_t k = 0; k < out.cells_; ++k) {
    if (counts[k] < 0) throw ConfigError("lattice: negative Poisson count");
    out.counts_[k + 1] = out.counts_[k] + counts[k];
  }
  std::sort(jump_times.begin(), jump_times.end());
  if (static_cast<std::int64_t>(jump_times.size()) != out.counts_.back()) {
    throw ConfigError("lattice: jump times disagree with Poisson counts");
  }
  out.jump_times_ = std::move(jump_times);
  return out;
}

std::vector<double> NoiseLattice::brownian_increments() const {
  std::vector<double> out(cells_ * brownian_dim_);
  for (std::size_t k = 0; k < cells_; ++k) {
    for (std::size_t j = 0; j < brownian_dim_; ++j) out[k * brownian_dim_ + j] = brownian_increment(k, j);
  }
  return out;
}

std::vector<std::int64_t> NoiseLattice::poisson_counts() const {
  std::vector<std::int64_t> out(cells_);
  for (std::size_t k = 0; k < cells_; ++k) out[k] = poisson_count(k);
  return out;
}

NoiseLattice generate_lattice(std::uint64_t master_seed, std::uint64_t path_index, double horizon, double step,
                              std::size_t brownian_dim, double intensity) {
  if (!(intensity >= 0.0) || !std::isfinite(intensity)) throw ConfigError("lattice: intensity must be >= 0");
  NoiseLattice out;
  out.cells_ = exact_ratio(horizon, step, "lattice horizon / step");
  out.horizon_ = horizon;
  out.base_step_ = step;
  out.brownian_dim_ = brownian_dim;
  out.intensity_ = intensity;

  // Brownian channel: N(0, step) increments, accumulated into B at the nodes.
  out.brownian_.assign((out.cells_ + 1) * brownian_dim, 0.0);
  if (brownian_dim > 0) {
    PhiloxStream rng(master_seed, path_index, static_cast<std::uint32_t>(NoiseChannel::brownian));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = std::sqrt(step);
    for (std::size_t k = 0; k < out.cells_; ++k) {
      for (std::size_t j = 0; j < brownian_dim; ++j) {
        out.brownian_[(k + 1) * brownian_dim + j] = out.brownian_[k * brownian_dim + j] + scale * normal(rng);
      }
    }
  }

  // Poisson channel: exponential inter-arrivals, then binned so that cell k
  // owns the events in (k step, (k + 1) step].
  std::vector<std::int64_t> per_cell(out.cells_, 0);
  if (intensity > 0.0) {
    PhiloxStream rng(master_seed, path_index, static_cast<std::uint32_t>(NoiseChannel::poisson));
    std::exponential_distribution<double> wait(intensity);
    double t = 0.0;
    for (;;) {
      t += wait(rng);
      if (t > horizon) break;
      out.jump_times_.push_back(t);
      const double cell = std::ceil(t / step) - 1.0;
      const auto k = static_cast<std::size_t>(std::clamp(cell, 0.0, static_cast<double>(out.cells_ - 1)));
      ++per_cell[k];
    }
  }
  out.counts_.assign(out.cells_ + 1, 0);
  for (std::size_t k = 0; k < out.cells_; ++k) out.counts_[k + 1] = out.counts_[k] + per_cell[k];
  return out;
}

NoiseLattice coarsen(const NoiseLattice& lattice, std::size_t factor) {
  if (factor == 0 || lattice.cells() % factor != 0) {
    throw ConfigError("coarsen: factor " + std::to_string(factor) + " does not divide " +
                      std::to_string(lattice.cells()) + " cells");
  }
  if (factor == 1) return lattice;
  NoiseLattice out;
  out.horizon_ = lattice.horizon_;
  out.base_step_ = lattice.base_step_;
  out.stride_ = lattice.stride_ * factor;
  out.cells_ = lattice.cells_ / factor;
  out.brownian_dim_ = lattice.brownian_dim_;
  out.intensity_ = lattice.intensity_;
  const std::size_t m = lattice.brownian_dim_;
  out.brownian_.resize((out.cells_ + 1) * m);
  out.counts_.resize(out.cells_ + 1);
  for (std::size_t k = 0; k <= out.cells_; ++k) {
    std::copy_n(lattice.brownian_.begin() + static_cast<std::ptrdiff_t>(k * factor * m), m,
                out.brownian_.begin() + static_cast<std::ptrdiff_t>(k * m));
    out.counts_[k] = lattice.counts_[k * factor];
  }
  out.jump_times_ = lattice.jump_times_;
  return out;
}

double poisson_increment_moment(double mean, unsigned p) {
  if (p == 0) return 1.0;
  // Row p of the Stirling triangle, S(n, k) = k S(n-1, k) + S(n-1, k-1).
  std::vector<double> stirling(p + 1, 0.0);
  stirling[0] = 1.0;
  for (unsigned n = 1; n <= p; ++n) {
    for (unsigned k = n; k >= 1; --k) stirling[k] = k * stirling[k] + stirling[k - 1];
    stirling[0] = 0.0;
  }
  double result = 0.0;
  double power = 1.0;
  for (unsigned i = 1; i <= p; ++i) {
    power *= mean;
    result += stirling[i] * power;
  }
  return result;
}

double gaussian_abs_moment(double variance, double p) {
  return std::pow(2.0 * variance, p / 2.0) * std::tgamma((p + 1.0) / 2.0) / std::sqrt(std::numbers::pi);
}

bool MomentCheck::passed() const noexcept {
  if (std_error == 0.0) return empirical == expected;
  return std::abs(empirical - expected) <= tolerance_se * std_error;
}

namespace {

MomentCheck sample_check(std::string name, const std::vector<double>& samples, double expected, double tol) {
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  const double se = samples.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return MomentCheck{std::move(name), mean, expected, se, tol};
}

}  // namespace

std::vector<MomentCheck> check_increment_moments(const NoiseLattice& lattice, std::span<const unsigned> orders,
                                                 double tolerance_se) {
  std::vector<MomentCheck> out;
  const std::size_t cells = lattice.cells();
  const double step = lattice.step();
  std::vector<double> samples(cells);
  if (lattice.brownian_dim() > 0) {
    for (std::size_t k = 0; k < cells; ++k) samples[k] = lattice.brownian_increment(k, 0);
    out.push_back(sample_check("E[dB]", samples, 0.0, tolerance_se));
    for (unsigned p : orders) {
      for (std::size_t k = 0; k < cells; ++k) samples[k] = std::pow(std::abs(lattice.brownian_increment(k, 0)), p);
      out.push_back(sample_check("E|dB|^" + std::to_string(p), samples, gaussian_abs_moment(step, p), tolerance_se));
    }
  }
  const double mean = lattice.intensity() * step;
  for (unsigned p : orders) {
    for (std::size_t k = 0; k < cells; ++k) samples[k] = std::pow(static_cast<double>(lattice.poisson_count(k)), p);
    out.push_back(sample_check("E[dN^" + std::to_string(p) + "]", samples, poisson_increment_moment(mean, p),
                               tolerance_se));
  }
  return out;
}

}  // namespace sfde
