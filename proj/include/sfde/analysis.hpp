#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfde/noise.hpp"
#include "sfde/solver.hpp"

namespace sfde {

/// Monte Carlo estimate of E sup_{0<=t<=T} |x(t) - y(t)|^p at one step size.
struct ErrorStat {
  double p = 2.0;
  double delta = 0.0;
  std::size_t num_paths = 0;
  double mean_sup_p = 0.0;
  double std_error = 0.0;
  double root_error = 0.0;  ///< mean_sup_p^(1/p)
};

/// Least-squares fit of log(error) = intercept + slope * log(delta).
struct RateEstimate {
  struct Point {
    double delta;
    double error;
  };
  std::vector<Point> points;
  double slope = 0.0;
  double intercept = 0.0;
  double residual_norm = 0.0;
  double slope_std_error = 0.0;  ///< zero with only two points
};

/// Neumaier-compensated sum.
double compensated_sum(std::span<const double> values);

/// Sample mean and standard error of the mean, reduced in index order.
struct MeanStat {
  double mean = 0.0;
  double std_error = 0.0;
};
MeanStat mean_and_std_error(std::span<const double> values);

/// sup over the nodes of [0, T] of |reference - approx|. Both paths must
/// share step, horizon and dimension; histories may differ.
double sup_gap(const PathGrid& reference, const PathGrid& approx);

/// sup_gap(reference, approx)^p.
double strong_error(const PathGrid& reference, const PathGrid& approx, double p);

/// Aggregates per-path sup gaps into an ErrorStat.
ErrorStat aggregate_error(std::span<const double> sup_gaps, double p, double delta);

/// Mean over paths of (max node norm over [-tau, T])^p.
double moment_bound_estimate(std::span<const PathGrid> paths, double p);
MeanStat moment_bound_stat(std::span<const PathGrid> paths, double p);

/// Throws ConfigError with fewer than two points or a non-positive error.
RateEstimate fit_rate(std::span<const RateEstimate::Point> points);

/// A point (s, theta) at which y(s + theta) is compared with ybar_s(theta),
/// both given in cells of the fine lattice.
struct InterpSample {
  std::size_t s_cells = 0;
  std::size_t theta_cells = 0;  ///< theta = -theta_cells * fine step
};

/// Draws `count` samples with s in [0, T) and theta in [-tau, 0] from the
/// sampling channel of (seed, path_index).
std::vector<InterpSample> draw_interp_samples(std::uint64_t seed, std::uint64_t path_index, std::size_t count,
                                              std::size_t horizon_cells, std::size_t tau_cells);

/// Sum over samples of |y(s + theta) - ybar_s(theta)|^p for one path, where y
/// is the continuous EM solution on the grid of `fine_noise` and ybar_s is the
/// window at the last coarse node not after s.
double segment_interp_defect(const EmConfig& cfg, const NoiseLattice& fine_noise, double p,
                             std::span<const InterpSample> samples);

/// Mean of |y(s + theta) - ybar_s(theta)|^p over the noise set and samples.
MeanStat segment_interp_error(const EmConfig& cfg, std::span<const NoiseLattice> noise, double p,
                              std::span<const InterpSample> samples);

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Results must be
/// written by index; the first exception (by index) is rethrown.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// How the study obtains the "true" path.
struct ReferenceSpec {
  enum class Kind { exact, fine_em };
  Kind kind = Kind::fine_em;
  std::size_t refinement_ratio = 32;  ///< finest study step / sup-grid step
  /// Exact reference parameters for dx = a x dt + b x dB + c x dN.
  double x0 = 1.0, a = 0.0, b = 0.0, c = 0.0;
};

struct StudyConfig {
  CoefficientSet coefficients;
  InitialData initial;
  double tau = 1.0;
  double horizon = 1.0;
  double intensity = 0.0;
  std::vector<double> steps;    ///< dyadic multiples of the finest
  std::vector<double> moments;  ///< p values, each >= 2
  std::size_t num_paths = 100;
  std::uint64_t master_seed = 0;
  ReferenceSpec reference;
  std::size_t workers = 1;

  /// Throws ConfigError on invalid combinations.
  void validate() const;
  double fine_step() const;
};

struct RateFit {
  double p = 2.0;
  std::optional<RateEstimate> root;  ///< slope of root_error against delta
  std::optional<RateEstimate> mean;  ///< slope of mean_sup_p against delta
  std::string warning;               ///< set when a fit was skipped
};

struct StudyReport {
  std::vector<ErrorStat> rows;  ///< grouped by p, then by step in input order
  std::vector<RateFit> rates;   ///< one per p
  double max_path_sup = 0.0;    ///< largest node norm over every simulated path
  double fine_step = 0.0;
};

/// Common-random-numbers study: each path's fine lattice drives the reference
/// and every coarsened EM run. Results do not depend on `workers`.
StudyReport convergence_study(const StudyConfig& study);

/// `p,delta,num_paths,mean_sup_p,std_error,root_error`
std::string study_report_csv(const StudyReport& report);
/// `p,slope,intercept,residual_norm` (root-error slopes; skipped fits omitted)
std::string rate_csv(const StudyReport& report);

/// E sup_{[-tau,T]} |y|^p for each step in `steps`, y the continuous EM
/// solution sampled on a common grid `refinement_ratio` times finer than the
/// smallest step.
struct MomentBoundRow {
  double delta = 0.0;
  MeanStat stat;
};
std::vector<MomentBoundRow> moment_bound_study(const StudyConfig& study);

/// Mean of |y(s + theta) - ybar_s(theta)|^p per step, `samples_per_path`
/// points per path shared by all steps.
struct InterpRow {
  double delta = 0.0;
  MeanStat stat;
};
std::vector<InterpRow> segment_interp_study(const StudyConfig& study, double p, std::size_t samples_per_path);

}  // namespace sfde
