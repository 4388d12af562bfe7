#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfde/segments.hpp"

namespace sfde {

/// Writes an n-vector computed from a delay window into `out`.
using VectorField = std::function<void(const SegmentView&, std::span<double>)>;
/// Writes an n x m matrix, row-major, computed from a delay window into `out`.
using MatrixField = std::function<void(const SegmentView&, std::span<double>)>;

/**
 * Drift f, diffusion g and jump coefficient h of
 *
 *   dx(t) = f(x_{t-}) dt + g(x_{t-}) dB(t) + h(x_{t-}) dN(t).
 *
 * `lipschitz_global` is the squared constant L with
 * |f(a) - f(b)|^2 v |g(a) - g(b)|^2 v |h(a) - h(b)|^2 <= L ||a - b||^2
 * (Frobenius norm for g). Families that are only locally Lipschitz leave it
 * empty. `growth_const` is the K with |f(a)|^2 v |g(a)|^2 v |h(a)|^2 <= K (1 + ||a||^2).
 */
struct CoefficientSet {
  std::string name;
  std::size_t dim = 1;
  std::size_t brownian_dim = 1;
  VectorField drift;
  MatrixField diffusion;
  VectorField jump;
  std::optional<double> lipschitz_global;
  std::optional<double> growth_const;
};

/// Reusable output buffers for one evaluation of a CoefficientSet.
struct CoefficientValues {
  std::vector<double> drift;
  std::vector<double> diffusion;
  std::vector<double> jump;

  CoefficientValues() = default;
  explicit CoefficientValues(const CoefficientSet& c)
      : drift(c.dim), diffusion(c.dim * c.brownian_dim), jump(c.dim) {}
};

void evaluate(const CoefficientSet& c, const SegmentView& seg, CoefficientValues& out);

State eval_drift(const CoefficientSet& c, const SegmentView& seg);
std::vector<double> eval_diffusion(const CoefficientSet& c, const SegmentView& seg);
State eval_jump(const CoefficientSet& c, const SegmentView& seg);

/// Finite measure on [-tau, 0] made of point masses.
struct DelayAtom {
  double theta = 0.0;
  double weight = 0.0;
};

class DelayMeasure {
 public:
  DelayMeasure() = default;
  /// Sorts atoms by theta; throws DomainError on negative or non-finite weights.
  explicit DelayMeasure(std::vector<DelayAtom> atoms);

  const std::vector<DelayAtom>& atoms() const noexcept { return atoms_; }
  /// mu(0) - mu(-tau).
  double total_weight() const noexcept;
  /// Throws DomainError if some atom lies outside [-tau, 0].
  void check_support(double tau) const;

 private:
  std::vector<DelayAtom> atoms_;
};

/// Radial projection onto the closed ball of radius j; the zero vector maps to itself.
State project(std::span<const double> x, double j);

/// Node-wise projection of every node onto the ball of radius j.
Segment truncate_segment(const Segment& seg, double j);

/// f_j = f o pi_j and likewise for g and h. Agrees with `base` bit for bit on
/// every window whose nodes all lie in the ball of radius j.
CoefficientSet make_truncated(const CoefficientSet& base, double j);

/// Coefficients of a linear delay equation
///   f(phi) = a0 phi(0) + a1 phi(-tau)
///   g(phi) e_k = b0[k] phi(0) + b1[k] phi(-tau)   (one pair per Brownian column)
///   h(phi) = c0 phi(0) + c1 phi(-tau)
struct LinearDelayParams {
  Eigen::MatrixXd a0, a1;
  std::vector<Eigen::MatrixXd> b0, b1;
  Eigen::MatrixXd c0, c1;

  /// Scalar equation with one Brownian motion.
  static LinearDelayParams scalar(double a0, double a1, double b0, double b1, double c0, double c1);
};

/// Throws DomainError on inconsistent shapes. The declared Lipschitz constant
/// is max over f, g, h of (||X0||_2 + ||X1||_2)^2 (summed over columns for g),
/// which is attained by the scalar family.
CoefficientSet linear_delay_coefficients(const LinearDelayParams& params);

/// Scalar dx = a x dt + b x dB + c x dN, no delay.
CoefficientSet geometric_coefficients(double a, double b, double c);

CoefficientSet zero_coefficients(std::size_t dim, std::size_t brownian_dim);

/// Replaces the drift of `base` by f(phi) = sum_k w_k phi(theta_k).
/// The declared constant becomes max(L_base, (sum_k w_k)^2).
CoefficientSet distributed_delay_drift(const DelayMeasure& measure, const CoefficientSet& base, double tau);

/// x (1 + ln(1 + |x|))^{1/4}: locally Lipschitz with squared constant on the
/// ball of radius j growing like (log j)^{1/2}.
double log_growth(double x) noexcept;

/// Scalar f = a l(phi(0)), g = b l(phi(0)), h = c l(phi(0)) with l = log_growth.
CoefficientSet log_growth_coefficients(double a, double b, double c);

/// Spectral norm, exposed for tests.
double spectral_norm(const Eigen::MatrixXd& m);

}  // namespace sfde
