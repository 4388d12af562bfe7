#include "sfde/coefficients.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <string>

namespace sfde {
namespace {

// Stack storage for the handful of window evaluations a coefficient needs.
class Scratch {
 public:
  explicit Scratch(std::size_t n) {
    if (n <= inline_.size()) {
      data_ = {inline_.data(), n};
    } else {
      heap_.resize(n);
      data_ = heap_;
    }
  }
  Scratch(const Scratch&) = delete;
  Scratch& operator=(const Scratch&) = delete;

  std::span<double> span() noexcept { return data_; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

 private:
  std::array<double, 8> inline_{};
  std::vector<double> heap_;
  std::span<double> data_;
};

void check_square(const Eigen::MatrixXd& m, std::size_t n, const char* name) {
  if (static_cast<std::size_t>(m.rows()) != n || static_cast<std::size_t>(m.cols()) != n) {
    throw DomainError(std::string("linear delay coefficients: ") + name + " must be " + std::to_string(n) + "x" +
                      std::to_string(n));
  }
}

// out = x0 * phi(0) + x1 * phi(-tau)
void apply_pair(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& x1, std::span<const double> now,
                std::span<const double> lagged, std::span<double> out, std::size_t stride, std::size_t column) {
  const auto n = static_cast<Eigen::Index>(now.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) acc += x0(i, k) * now[static_cast<std::size_t>(k)];
    for (Eigen::Index k = 0; k < n; ++k) acc += x1(i, k) * lagged[static_cast<std::size_t>(k)];
    out[static_cast<std::size_t>(i) * stride + column] = acc;
  }
}

double pair_constant(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& x1) {
  const double s = spectral_norm(x0) + spectral_norm(x1);
  return s * s;
}

}  // namespace

void evaluate(const CoefficientSet& c, const SegmentView& seg, CoefficientValues& out) {
  c.drift(seg, out.drift);
  c.diffusion(seg, out.diffusion);
  c.jump(seg, out.jump);
}

State eval_drift(const CoefficientSet& c, const SegmentView& seg) {
  State out(c.dim);
  c.drift(seg, out);
  return out;
}

std::vector<double> eval_diffusion(const CoefficientSet& c, const SegmentView& seg) {
  std::vector<double> out(c.dim * c.brownian_dim);
  c.diffusion(seg, out);
  return out;
}

State eval_jump(const CoefficientSet& c, const SegmentView& seg) {
  State out(c.dim);
  c.jump(seg, out);
  return out;
}

DelayMeasure::DelayMeasure(std::vector<DelayAtom> atoms) : atoms_(std::move(atoms)) {
  for (const auto& a : atoms_) {
    if (!std::isfinite(a.theta) || !std::isfinite(a.weight) || a.weight < 0.0) {
      throw DomainError("delay measure: atoms need finite theta and nonnegative weight");
    }
  }
  std::stable_sort(atoms_.begin(), atoms_.end(),
                   [](const DelayAtom& l, const DelayAtom& r) { return l.theta < r.theta; });
}

double DelayMeasure::total_weight() const noexcept {
  double total = 0.0;
  for (const auto& a : atoms_) total += a.weight;
  return total;
}

void DelayMeasure::check_support(double tau) const {
  for (const auto& a : atoms_) {
    if (a.theta < -tau || a.theta > 0.0) {
      throw DomainError("delay measure: atom at theta = " + std::to_string(a.theta) + " outside [-tau, 0]");
    }
  }
}

State project(std::span<const double> x, double j) {
  if (!(j > 0.0)) throw DomainError("projection radius must be positive");
  State out(x.begin(), x.end());
  const double norm = euclidean_norm(x);
  if (norm > j) {
    const double s = j / norm;
    for (double& v : out) v *= s;
  }
  return out;
}

Segment truncate_segment(const Segment& seg, double j) {
  const SegmentView clipped = seg.view().truncated(j);
  std::vector<double> values(seg.values().size());
  const std::size_t n = seg.grid().dim;
  for (std::size_t i = 0; i < seg.grid().node_count(); ++i) {
    clipped.node(i, std::span<double>(values).subspan(i * n, n));
  }
  return Segment(seg.grid(), std::move(values));
}

CoefficientSet make_truncated(const CoefficientSet& base, double j) {
  if (!(j > 0.0)) throw DomainError("truncation radius must be positive");
  auto wrap = [j](VectorField field) -> VectorField {
    return [field = std::move(field), j](const SegmentView& seg, std::span<double> out) {
      field(seg.truncated(j), out);
    };
  };
  CoefficientSet out = base;
  out.name = base.name + "|truncated(" + std::to_string(j) + ")";
  out.drift = wrap(base.drift);
  out.diffusion = wrap(base.diffusion);
  out.jump = wrap(base.jump);
  return out;
}

LinearDelayParams LinearDelayParams::scalar(double a0, double a1, double b0, double b1, double c0, double c1) {
  auto m = [](double v) { return Eigen::MatrixXd::Constant(1, 1, v); };
  return LinearDelayParams{m(a0), m(a1), {m(b0)}, {m(b1)}, m(c0), m(c1)};
}

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

CoefficientSet linear_delay_coefficients(const LinearDelayParams& params) {
  const auto n = static_cast<std::size_t>(params.a0.rows());
  if (n == 0) throw DomainError("linear delay coefficients: empty drift matrix");
  check_square(params.a0, n, "a0");
  check_square(params.a1, n, "a1");
  check_square(params.c0, n, "c0");
  check_square(params.c1, n, "c1");
  if (params.b0.size() != params.b1.size()) {
    throw DomainError("linear delay coefficients: b0 and b1 must list the same number of Brownian columns");
  }
  for (std::size_t k = 0; k < params.b0.size(); ++k) {
    check_square(params.b0[k], n, "b0");
    check_square(params.b1[k], n, "b1");
  }

  auto p = std::make_shared<const LinearDelayParams>(params);
  const std::size_t m = p->b0.size();

  CoefficientSet c;
  c.name = "linear_delay";
  c.dim = n;
  c.brownian_dim = m;
  c.drift = [p](const SegmentView& seg, std::span<double> out) {
    Scratch now(seg.dim()), lagged(seg.dim());
    seg.eval(0.0, now.span());
    seg.eval(-seg.tau(), lagged.span());
    apply_pair(p->a0, p->a1, now.span(), lagged.span(), out, 1, 0);
  };
  c.diffusion = [p, m](const SegmentView& seg, std::span<double> out) {
    Scratch now(seg.dim()), lagged(seg.dim());
    seg.eval(0.0, now.span());
    seg.eval(-seg.tau(), lagged.span());
    for (std::size_t k = 0; k < m; ++k) apply_pair(p->b0[k], p->b1[k], now.span(), lagged.span(), out, m, k);
  };
  c.jump = [p](const SegmentView& seg, std::span<double> out) {
    Scratch now(seg.dim()), lagged(seg.dim());
    seg.eval(0.0, now.span());
    seg.eval(-seg.tau(), lagged.span());
    apply_pair(p->c0, p->c1, now.span(), lagged.span(), out, 1, 0);
  };

  double lg = 0.0;
  for (std::size_t k = 0; k < m; ++k) lg += pair_constant(p->b0[k], p->b1[k]);
  const double lipschitz = std::max({pair_constant(p->a0, p->a1), lg, pair_constant(p->c0, p->c1)});
  c.lipschitz_global = lipschitz;
  // f(0) = g(0) = h(0) = 0, so the linear growth constant is 2L.
  c.growth_const = 2.0 * lipschitz;
  return c;
}

CoefficientSet geometric_coefficients(double a, double b, double c) {
  CoefficientSet out = linear_delay_coefficients(LinearDelayParams::scalar(a, 0.0, b, 0.0, c, 0.0));
  out.name = "geometric";
  return out;
}

CoefficientSet zero_coefficients(std::size_t dim, std::size_t brownian_dim) {
  if (dim == 0) throw DomainError("zero coefficients: dim must be at least 1");
  auto zero = [](const SegmentView&, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
  CoefficientSet c;
  c.name = "zero";
  c.dim = dim;
  c.brownian_dim = brownian_dim;
  c.drift = zero;
  c.diffusion = zero;
  c.jump = zero;
  c.lipschitz_global = 0.0;
  c.growth_const = 0.0;
  return c;
}

CoefficientSet distributed_delay_drift(const DelayMeasure& measure, const CoefficientSet& base, double tau) {
  if (!(tau > 0.0)) throw DomainError("distributed delay drift: tau must be positive");
  measure.check_support(tau);
  CoefficientSet c = base;
  c.name = "distributed_delay(" + base.name + ")";
  c.drift = [atoms = measure.atoms()](const SegmentView& seg, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    Scratch value(seg.dim());
    for (const auto& atom : atoms) {
      seg.eval(atom.theta, value.span());
      for (std::size_t d = 0; d < out.size(); ++d) out[d] += atom.weight * value[d];
    }
  };
  const double total = measure.total_weight();
  if (base.lipschitz_global) {
    c.lipschitz_global = std::max(*base.lipschitz_global, total * total);
  }
  c.growth_const.reset();
  return c;
}

double log_growth(double x) noexcept { return x * std::pow(1.0 + std::log1p(std::abs(x)), 0.25); }

CoefficientSet log_growth_coefficients(double a, double b, double c) {
  CoefficientSet out;
  out.name = "log_growth";
  out.dim = 1;
  out.brownian_dim = 1;
  auto scaled = [](double k) {
    return [k](const SegmentView& seg, std::span<double> v) {
      double now = 0.0;
      seg.eval(0.0, std::span<double>(&now, 1));
      v[0] = k * log_growth(now);
    };
  };
  out.drift = scaled(a);
  out.diffusion = scaled(b);
  out.jump = scaled(c);
  return out;
}

}  // namespace sfde
