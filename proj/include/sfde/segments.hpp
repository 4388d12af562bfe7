#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace sfde {

/// A point of R^n.
using State = std::vector<double>;

/// Argument outside the domain of a segment or coefficient.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Euclidean norm.
double euclidean_norm(std::span<const double> x) noexcept;

/// Uniform grid on [-tau, 0] with `lags` subintervals of width tau / lags.
struct SegmentGrid {
  double tau = 1.0;
  std::size_t lags = 1;
  std::size_t dim = 1;

  double step() const noexcept { return tau / static_cast<double>(lags); }
  std::size_t node_count() const noexcept { return lags + 1; }

  /// Throws DomainError unless tau > 0, lags >= 1 and dim >= 1.
  void validate() const;

  bool operator==(const SegmentGrid&) const = default;
};

/**
 * Non-owning view of a delay window: node i holds phi(-tau + i * step) for
 * i = 0..lags, stored row-major with `dim` entries per node. Between nodes
 * the window is the linear interpolant of the bracketing nodes.
 *
 * A view may carry a clipping radius, in which case every node is radially
 * projected onto the closed ball of that radius before use. The solver hands
 * coefficients views into its own path buffer, so sliding the window costs
 * nothing.
 */
class SegmentView {
 public:
  SegmentView(const SegmentGrid& grid, std::span<const double> nodes,
              double radius = std::numeric_limits<double>::infinity());

  const SegmentGrid& grid() const noexcept { return grid_; }
  double tau() const noexcept { return grid_.tau; }
  std::size_t dim() const noexcept { return grid_.dim; }
  double radius() const noexcept { return radius_; }
  bool clipped() const noexcept { return radius_ != std::numeric_limits<double>::infinity(); }

  /// Node i (0 = oldest, lags = present), after clipping.
  void node(std::size_t i, std::span<double> out) const;
  State node(std::size_t i) const;

  /// phi(theta) for theta in [-tau, 0]; grid nodes are returned exactly.
  void eval(double theta, std::span<double> out) const;
  State eval(double theta) const;

  /// sup over [-tau, 0] of |phi|, which for a piecewise-linear window is the
  /// largest node norm.
  double sup_norm() const;

  /// Same window seen through an additional clipping radius.
  SegmentView truncated(double radius) const;

  std::span<const double> raw_nodes() const noexcept { return nodes_; }

 private:
  double node_scale(std::size_t i) const;

  SegmentGrid grid_;
  std::span<const double> nodes_;
  double radius_;
};

/// Owning delay window. Immutable after construction.
class Segment {
 public:
  /// `values` holds grid.node_count() * grid.dim finite entries, row-major.
  Segment(SegmentGrid grid, std::vector<double> values);

  static Segment from_nodes(SegmentGrid grid, const std::vector<State>& nodes);

  /// Samples `phi(theta)` at every grid node.
  template <typename F>
  static Segment sample(SegmentGrid grid, F&& phi) {
    grid.validate();
    std::vector<State> nodes;
    nodes.reserve(grid.node_count());
    const double h = grid.step();
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
      const double theta = i == grid.lags ? 0.0 : -grid.tau + static_cast<double>(i) * h;
      nodes.push_back(phi(theta));
    }
    return from_nodes(grid, nodes);
  }

  const SegmentGrid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  State value(std::size_t i) const;

  SegmentView view() const { return SegmentView(grid_, values_); }

  State eval(double theta) const { return view().eval(theta); }
  double sup_norm() const { return view().sup_norm(); }

  /// Drops the oldest node and appends `new_value` as phi(0).
  Segment advance(std::span<const double> new_value) const;

  bool operator==(const Segment&) const = default;

 private:
  SegmentGrid grid_;
  std::vector<double> values_;
};

}  // namespace sfde
