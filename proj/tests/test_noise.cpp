#include <doctest.h>

#include <cmath>
#include <random>

#include "sfde/analysis.hpp"
#include "sfde/noise.hpp"
#include "sfde/philox.hpp"

using namespace sfde;

namespace {

using Block = std::array<std::uint32_t, 4>;

NoiseLattice hand_lattice(std::vector<double> increments, std::vector<std::int64_t> counts) {
  const double step = 0.25;
  std::vector<double> times;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    for (std::int64_t i = 0; i < counts[k]; ++i) times.push_back((static_cast<double>(k) + 0.5) * step);
  }
  return NoiseLattice::from_increments(step * static_cast<double>(counts.size()), step, 1, 1.0, increments, counts,
                                       times);
}

// E[X^p] for X ~ Poisson(mean) from the pmf truncated at k = 50.
double poisson_moment_by_pmf(double mean, unsigned p) {
  double total = 0.0;
  double pmf = std::exp(-mean);
  for (int k = 0; k <= 50; ++k) {
    if (k > 0) pmf *= mean / k;
    total += pmf * std::pow(static_cast<double>(k), p);
  }
  return total;
}

}  // namespace

TEST_CASE("philox known-answer vectors") {
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        Block{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("philox streams are keyed by seed, stream and channel") {
  auto first_words = [](PhiloxStream s) {
    std::vector<std::uint32_t> w(8);
    for (auto& x : w) x = s();
    return w;
  };
  const auto base = first_words(PhiloxStream(1, 2, 0));
  CHECK(base == first_words(PhiloxStream(1, 2, 0)));
  CHECK(base != first_words(PhiloxStream(2, 2, 0)));
  CHECK(base != first_words(PhiloxStream(1, 3, 0)));
  CHECK(base != first_words(PhiloxStream(1, 2, 1)));
  CHECK(first_words(PhiloxStream(1, 0x100000000ULL, 0)) != first_words(PhiloxStream(1, 0, 0)));
}

TEST_CASE("generate_lattice examples") {
  SUBCASE("no jumps when lambda is zero") {
    const NoiseLattice l = generate_lattice(3, 0, 1.0, 1.0 / 64, 1, 0.0);
    CHECK(l.cells() == 64);
    for (auto c : l.poisson_counts()) CHECK(c == 0);
    CHECK(l.jump_times().empty());
  }
  SUBCASE("deterministic in seed and path index") {
    CHECK(generate_lattice(5, 9, 1.0, 1.0 / 128, 2, 3.0) == generate_lattice(5, 9, 1.0, 1.0 / 128, 2, 3.0));
    CHECK_FALSE(generate_lattice(5, 9, 1.0, 1.0 / 128, 2, 3.0) == generate_lattice(5, 10, 1.0, 1.0 / 128, 2, 3.0));
  }
  SUBCASE("zero Brownian width leaves the jump part unchanged") {
    const NoiseLattice a = generate_lattice(8, 1, 1.0, 1.0 / 32, 0, 4.0);
    const NoiseLattice b = generate_lattice(8, 1, 1.0, 1.0 / 32, 3, 4.0);
    CHECK(a.brownian_increments().empty());
    CHECK(a.poisson_counts() == b.poisson_counts());
    CHECK(a.jump_times() == b.jump_times());
  }
  SUBCASE("non-integral horizon / step") {
    CHECK_THROWS_AS(generate_lattice(1, 0, 1.0, 0.3, 1, 0.0), ConfigError);
    CHECK_THROWS_AS(generate_lattice(1, 0, 1.0, 0.25, 1, -1.0), ConfigError);
  }
}

TEST_CASE("lattice invariants: counts bin the jump times") {
  for (std::uint64_t path = 0; path < 50; ++path) {
    const double step = 1.0 / 16;
    const NoiseLattice l = generate_lattice(77, path, 2.0, step, 1, 5.0);
    const auto counts = l.poisson_counts();
    std::int64_t total = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      std::int64_t brute = 0;
      for (double t : l.jump_times()) brute += (t > k * step && t <= (k + 1) * step) ? 1 : 0;
      CHECK(counts[k] == brute);
      total += counts[k];
    }
    CHECK(total == static_cast<std::int64_t>(l.jump_times().size()));
    CHECK(std::is_sorted(l.jump_times().begin(), l.jump_times().end()));
    for (double t : l.jump_times()) CHECK((t > 0.0 && t <= 2.0));
  }
}

TEST_CASE("coarsen examples") {
  const NoiseLattice l = hand_lattice({0.1, -0.2, 0.3, 0.4}, {0, 1, 2, 0});
  const NoiseLattice c2 = coarsen(l, 2);
  const auto inc = c2.brownian_increments();
  REQUIRE(inc.size() == 2);
  CHECK(inc[0] == doctest::Approx(-0.1));
  CHECK(inc[1] == doctest::Approx(0.7));
  CHECK(c2.step() == 0.5);
  CHECK(coarsen(l, 4).poisson_counts() == std::vector<std::int64_t>{3});
  CHECK(coarsen(l, 1) == l);
  CHECK(coarsen(l, 4).jump_times() == l.jump_times());
  CHECK_THROWS_AS(coarsen(l, 3), ConfigError);
  CHECK_THROWS_AS(coarsen(l, 0), ConfigError);
}

TEST_CASE("coarsening composes exactly and preserves totals") {
  const NoiseLattice l = generate_lattice(11, 4, 1.0, 1.0 / 256, 2, 3.0);
  for (std::size_t r1 : {1u, 2u, 4u, 8u}) {
    for (std::size_t r2 : {1u, 2u, 4u, 16u}) {
      const NoiseLattice lhs = coarsen(coarsen(l, r1), r2);
      CHECK(lhs == coarsen(l, r1 * r2));
      CHECK(lhs.count_at(lhs.cells()) == l.count_at(l.cells()));
      CHECK(lhs.brownian_at(lhs.cells())[1] == l.brownian_at(l.cells())[1]);
    }
  }
}

TEST_CASE("coarse increments equal sums of fine increments") {
  const NoiseLattice l = generate_lattice(12, 0, 1.0, 1.0 / 64, 1, 2.0);
  const auto fine = l.brownian_increments();
  const auto fine_counts = l.poisson_counts();
  const NoiseLattice c = coarsen(l, 8);
  for (std::size_t k = 0; k < c.cells(); ++k) {
    double sum = 0.0;
    std::int64_t count = 0;
    for (std::size_t i = 8 * k; i < 8 * (k + 1); ++i) {
      sum += fine[i];
      count += fine_counts[i];
    }
    CHECK(c.brownian_increment(k, 0) == doctest::Approx(sum).epsilon(1e-12));
    CHECK(c.poisson_count(k) == count);
  }
}

TEST_CASE("poisson_increment_moment") {
  for (double mu : {0.0, 0.01, 0.3, 1.0, 2.5}) {
    CHECK(poisson_increment_moment(mu, 1) == doctest::Approx(mu));
    CHECK(poisson_increment_moment(mu, 2) == doctest::Approx(mu + mu * mu));
    CHECK(poisson_increment_moment(mu, 3) == doctest::Approx(mu + 3 * mu * mu + mu * mu * mu));
    for (unsigned p = 1; p <= 6; ++p) {
      CHECK(poisson_increment_moment(mu, p) == doctest::Approx(poisson_moment_by_pmf(mu, p)).epsilon(1e-12));
    }
  }
}

TEST_CASE("second Poisson moment against a simulation of 1e6 draws") {
  const double mu = 0.7;
  std::mt19937_64 rng(2024);
  std::poisson_distribution<int> poisson(mu);
  std::vector<double> squares(1000000);
  for (double& s : squares) {
    const int k = poisson(rng);
    s = static_cast<double>(k) * k;
  }
  const MeanStat stat = mean_and_std_error(squares);
  CHECK(std::abs(stat.mean - poisson_increment_moment(mu, 2)) < 4.0 * stat.std_error);
}

TEST_CASE("gaussian_abs_moment") {
  CHECK(gaussian_abs_moment(2.0, 2.0) == doctest::Approx(2.0));
  CHECK(gaussian_abs_moment(0.5, 4.0) == doctest::Approx(3.0 * 0.25));
  CHECK(gaussian_abs_moment(1.0, 1.0) == doctest::Approx(std::sqrt(2.0 / M_PI)));
  CHECK(gaussian_abs_moment(1.0, 3.0) == doctest::Approx(2.0 * std::sqrt(2.0 / M_PI)));
  CHECK(gaussian_abs_moment(0.01, 6.0) == doctest::Approx(15.0 * 1e-6));
}

TEST_CASE("increment moments of a generated lattice match the exact values") {
  const NoiseLattice l = generate_lattice(99, 0, 1.0, 1e-5, 1, 5000.0);
  const std::vector<unsigned> orders{1, 2, 3, 4};
  const auto checks = check_increment_moments(l, orders, 4.0);
  CHECK(checks.size() == 9);
  for (const auto& c : checks) {
    INFO(c.name, " empirical=", c.empirical, " expected=", c.expected, " se=", c.std_error);
    CHECK(c.passed());
  }
}
