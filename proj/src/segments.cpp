#include "sfde/segments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace sfde {

double euclidean_norm(std::span<const double> x) noexcept {
  double sum = 0.0;
  for (double v : x) sum += v * v;
  return std::sqrt(sum);
}

void SegmentGrid::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("segment grid: tau must be positive and finite");
  if (lags < 1) throw DomainError("segment grid: lags must be at least 1");
  if (dim < 1) throw DomainError("segment grid: dim must be at least 1");
}

SegmentView::SegmentView(const SegmentGrid& grid, std::span<const double> nodes, double radius)
    : grid_(grid), nodes_(nodes), radius_(radius) {
  if (nodes_.size() != grid_.node_count() * grid_.dim) {
    throw DomainError("segment view: expected " + std::to_string(grid_.node_count() * grid_.dim) +
                      " values, got " + std::to_string(nodes_.size()));
  }
  if (!(radius_ > 0.0)) throw DomainError("segment view: clipping radius must be positive");
}

// Factor that maps node i onto the clipping ball; exactly 1 inside it.
double SegmentView::node_scale(std::size_t i) const {
  if (!clipped()) return 1.0;
  const double norm = euclidean_norm(nodes_.subspan(i * grid_.dim, grid_.dim));
  return norm > radius_ ? radius_ / norm : 1.0;
}

void SegmentView::node(std::size_t i, std::span<double> out) const {
  const std::size_t n = grid_.dim;
  const double s = node_scale(i);
  const double* v = nodes_.data() + i * n;
  if (s == 1.0) {
    std::copy(v, v + n, out.begin());
  } else {
    for (std::size_t d = 0; d < n; ++d) out[d] = s * v[d];
  }
}

State SegmentView::node(std::size_t i) const {
  State out(grid_.dim);
  node(i, out);
  return out;
}

void SegmentView::eval(double theta, std::span<double> out) const {
  const double tau = grid_.tau;
  if (!(theta >= -tau && theta <= 0.0)) {
    throw DomainError("segment eval: theta = " + std::to_string(theta) + " outside [-tau, 0]");
  }
  if (theta == 0.0) {
    node(grid_.lags, out);
    return;
  }
  const double pos = (theta + tau) / grid_.step();
  const double nearest = std::nearbyint(pos);
  const double last = static_cast<double>(grid_.lags);
  // theta + tau carries rounding of order eps * tau, i.e. eps * lags cells.
  if (std::abs(pos - nearest) <= 16.0 * std::numeric_limits<double>::epsilon() * last) {
    node(static_cast<std::size_t>(std::clamp(nearest, 0.0, last)), out);
    return;
  }
  const double left = std::clamp(std::floor(pos), 0.0, last - 1.0);
  const auto i = static_cast<std::size_t>(left);
  const double u = pos - left;  // weight on the right-hand node
  const std::size_t n = grid_.dim;
  const double sl = node_scale(i) * (1.0 - u);
  const double sr = node_scale(i + 1) * u;
  const double* a = nodes_.data() + i * n;
  const double* b = a + n;
  for (std::size_t d = 0; d < n; ++d) out[d] = sl * a[d] + sr * b[d];
}

State SegmentView::eval(double theta) const {
  State out(grid_.dim);
  eval(theta, out);
  return out;
}

double SegmentView::sup_norm() const {
  double best = 0.0;
  for (std::size_t i = 0; i < grid_.node_count(); ++i) {
    const double norm = euclidean_norm(nodes_.subspan(i * grid_.dim, grid_.dim));
    best = std::max(best, clipped() ? std::min(norm, radius_) : norm);
  }
  return best;
}

SegmentView SegmentView::truncated(double radius) const {
  if (!(radius > 0.0)) throw DomainError("truncation radius must be positive");
  return SegmentView(grid_, nodes_, std::min(radius_, radius));
}

Segment::Segment(SegmentGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
  grid_.validate();
  if (values_.size() != grid_.node_count() * grid_.dim) {
    throw DomainError("segment: expected " + std::to_string(grid_.node_count()) + " nodes of dimension " +
                      std::to_string(grid_.dim));
  }
  if (!std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); })) {
    throw DomainError("segment: node values must be finite");
  }
}

Segment Segment::from_nodes(SegmentGrid grid, const std::vector<State>& nodes) {
  std::vector<double> flat;
  flat.reserve(nodes.size() * grid.dim);
  for (const auto& v : nodes) {
    if (v.size() != grid.dim) throw DomainError("segment: node has wrong dimension");
    flat.insert(flat.end(), v.begin(), v.end());
  }
  return Segment(grid, std::move(flat));
}

State Segment::value(std::size_t i) const {
  if (i >= grid_.node_count()) throw DomainError("segment: node index out of range");
  const auto first = values_.begin() + static_cast<std::ptrdiff_t>(i * grid_.dim);
  return State(first, first + static_cast<std::ptrdiff_t>(grid_.dim));
}

Segment Segment::advance(std::span<const double> new_value) const {
  if (new_value.size() != grid_.dim) {
    throw DomainError("segment advance: new value has dimension " + std::to_string(new_value.size()) +
                      ", expected " + std::to_string(grid_.dim));
  }
  std::vector<double> next(values_.begin() + static_cast<std::ptrdiff_t>(grid_.dim), values_.end());
  next.insert(next.end(), new_value.begin(), new_value.end());
  return Segment(grid_, std::move(next));
}

}  // namespace sfde
