#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "sfde/segments.hpp"

using namespace sfde;

namespace {

// Direct transcription of the interpolation rule: for i in {-N..-1} with
// i*D <= theta <= (i+1)*D, weight ((i+1)D - theta)/D on the node at iD and
// (theta - iD)/D on the node at (i+1)D.
double interpolate_by_brackets(const std::vector<double>& nodes, double tau, double theta) {
  const int lags = static_cast<int>(nodes.size()) - 1;
  const double d = tau / lags;
  for (int i = -lags; i <= -1; ++i) {
    if (i * d <= theta && theta <= (i + 1) * d) {
      return ((i + 1) * d - theta) / d * nodes[static_cast<std::size_t>(i + lags)] +
             (theta - i * d) / d * nodes[static_cast<std::size_t>(i + lags + 1)];
    }
  }
  throw std::logic_error("theta outside [-tau, 0]");
}

Segment scalar_segment(double tau, std::vector<double> nodes) {
  const SegmentGrid grid{tau, nodes.size() - 1, 1};
  return Segment(grid, std::move(nodes));
}

}  // namespace

TEST_CASE("segment_eval on grid nodes and midpoints") {
  const Segment seg = scalar_segment(1.0, {1.0, 3.0});
  CHECK(seg.eval(-1.0)[0] == 1.0);
  CHECK(seg.eval(-0.5)[0] == doctest::Approx(2.0));
  CHECK(seg.eval(0.0)[0] == 3.0);
}

TEST_CASE("segment_eval matches the bracket formula on a two-lag window") {
  const std::vector<double> nodes{0.0, 2.0, 6.0};
  const Segment seg = scalar_segment(2.0, nodes);
  const double oracle = interpolate_by_brackets(nodes, 2.0, -0.5);
  CHECK(oracle == doctest::Approx(4.0));
  CHECK(seg.eval(-0.5)[0] == doctest::Approx(oracle));
}

TEST_CASE("segment_eval agrees with the bracket formula at random theta") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> value(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t lags = 1 + trial % 9;
    const double tau = 0.1 + 0.05 * trial;
    std::vector<double> nodes(lags + 1);
    for (double& v : nodes) v = value(rng);
    const Segment seg = scalar_segment(tau, nodes);
    std::uniform_real_distribution<double> theta(-tau, 0.0);
    for (int k = 0; k < 20; ++k) {
      const double t = theta(rng);
      CHECK(seg.eval(t)[0] == doctest::Approx(interpolate_by_brackets(nodes, tau, t)).epsilon(1e-12));
    }
  }
}

TEST_CASE("segment_eval rejects theta outside the window") {
  const Segment seg = scalar_segment(1.0, {1.0, 3.0});
  CHECK_THROWS_AS(seg.eval(-1.5), DomainError);
  CHECK_THROWS_AS(seg.eval(0.1), DomainError);
  CHECK_THROWS_AS(seg.eval(std::nan("")), DomainError);
}

TEST_CASE("segment nodes are reproduced exactly") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  for (std::size_t lags : {1u, 3u, 7u, 10u, 33u}) {
    for (double tau : {0.1, 0.25, 0.3, 1.0, 2.7}) {
      const SegmentGrid grid{tau, lags, 2};
      std::vector<double> values(grid.node_count() * 2);
      for (double& v : values) v = normal(rng);
      const Segment seg(grid, values);
      for (std::size_t i = 0; i <= lags; ++i) {
        const double theta = -tau + static_cast<double>(i) * grid.step();
        const State got = seg.eval(std::min(theta, 0.0));
        CHECK(got == seg.value(i));
      }
    }
  }
}

TEST_CASE("affine windows are interpolated exactly up to rounding") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = coef(rng), b = coef(rng);
    const double tau = 0.2 + 0.03 * trial;
    const SegmentGrid grid{tau, static_cast<std::size_t>(1 + trial % 12), 1};
    const Segment seg = Segment::sample(grid, [&](double theta) { return State{a + b * theta}; });
    std::uniform_real_distribution<double> theta(-tau, 0.0);
    for (int k = 0; k < 50; ++k) {
      const double t = theta(rng);
      const double expected = a + b * t;
      const double scale = std::abs(a) + std::abs(b) * tau;
      CHECK(std::abs(seg.eval(t)[0] - expected) <= 4.0 * std::numeric_limits<double>::epsilon() * scale * 4.0);
    }
  }
}

TEST_CASE("segment_sup_norm") {
  CHECK(scalar_segment(1.0, {1.0, -3.0}).sup_norm() == 3.0);
  CHECK(scalar_segment(1.0, {0.0, 0.0, 0.0}).sup_norm() == 0.0);
  const Segment planar(SegmentGrid{1.0, 1, 2}, {3.0, 4.0, 0.0, 0.0});
  CHECK(planar.sup_norm() == 5.0);
}

TEST_CASE("sup norm equals the supremum of the interpolant") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    const SegmentGrid grid{1.5, static_cast<std::size_t>(1 + trial % 6), 3};
    std::vector<double> values(grid.node_count() * 3);
    for (double& v : values) v = normal(rng);
    const Segment seg(grid, values);
    double dense = 0.0;
    const int samples = 6000;
    for (int k = 0; k <= samples; ++k) {
      const double theta = k == samples ? 0.0 : -grid.tau + grid.tau * k / samples;
      dense = std::max(dense, euclidean_norm(seg.eval(theta)));
    }
    CHECK(seg.sup_norm() == doctest::Approx(dense).epsilon(1e-12));
  }
}

TEST_CASE("segment_advance slides the window") {
  const Segment a = scalar_segment(1.0, {1.0, 2.0});
  const std::vector<double> three{3.0};
  CHECK(a.advance(three) == scalar_segment(1.0, {2.0, 3.0}));

  const Segment c = scalar_segment(1.0, {5.0, 5.0, 5.0});
  const std::vector<double> five{5.0};
  CHECK(c.advance(five) == c);

  const std::vector<double> nine{9.0};
  CHECK(scalar_segment(2.0, {0.0, 1.0, 2.0}).advance(nine) == scalar_segment(2.0, {1.0, 2.0, 9.0}));

  const std::vector<double> wrong{1.0, 2.0};
  CHECK_THROWS_AS(a.advance(wrong), DomainError);
}

TEST_CASE("advancing never grows the sup norm beyond its inputs") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const SegmentGrid grid{1.0, static_cast<std::size_t>(1 + trial % 5), 2};
    std::vector<double> values(grid.node_count() * 2);
    for (double& v : values) v = normal(rng);
    const Segment seg(grid, values);
    const std::vector<double> next{normal(rng), normal(rng)};
    CHECK(seg.advance(next).sup_norm() <= std::max(seg.sup_norm(), euclidean_norm(next)));
  }
}

TEST_CASE("segment construction validates shape and finiteness") {
  CHECK_THROWS_AS(Segment(SegmentGrid{1.0, 2, 1}, {1.0, 2.0}), DomainError);
  CHECK_THROWS_AS(Segment(SegmentGrid{0.0, 1, 1}, {1.0, 2.0}), DomainError);
  CHECK_THROWS_AS(Segment(SegmentGrid{1.0, 1, 1}, {1.0, std::numeric_limits<double>::infinity()}), DomainError);
}

TEST_CASE("clipped views project every node") {
  const Segment seg = scalar_segment(1.0, {0.0, 10.0});
  const SegmentView clipped = seg.view().truncated(1.0);
  CHECK(clipped.node(1)[0] == 1.0);
  CHECK(clipped.eval(-0.5)[0] == doctest::Approx(0.5));
  CHECK(clipped.sup_norm() == 1.0);
  // Nested clipping keeps the tighter radius.
  CHECK(clipped.truncated(5.0).radius() == 1.0);
}
