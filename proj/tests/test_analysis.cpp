#include <doctest.h>

#include <cmath>
#include <random>

#include "sfde/analysis.hpp"

using namespace sfde;

namespace {

PathGrid scalar_path(std::vector<double> values, double step = 0.5) {
  PathGrid out(step, 0, values.size() - 1, 1);
  for (std::size_t i = 0; i < values.size(); ++i) out.node(i)[0] = values[i];
  return out;
}

// Closed-form ordinary least squares on (log delta, log error).
double ols_slope(const std::vector<RateEstimate::Point>& points) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(points.size());
  for (const auto& p : points) {
    const double x = std::log(p.delta), y = std::log(p.error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

StudyConfig geometric_study() {
  StudyConfig s;
  s.coefficients = geometric_coefficients(-1.0, 0.5, 0.0);
  s.initial = InitialData::constant({1.0});
  s.tau = 0.25;
  s.horizon = 1.0;
  s.steps = {1.0 / 8, 1.0 / 16, 1.0 / 32};
  s.moments = {2.0, 4.0};
  s.num_paths = 64;
  s.master_seed = 5;
  s.reference.kind = ReferenceSpec::Kind::exact;
  s.reference.refinement_ratio = 8;
  s.reference.a = -1.0;
  s.reference.b = 0.5;
  return s;
}

StudyConfig delayed_jump_study() {
  StudyConfig s;
  s.coefficients = linear_delay_coefficients(LinearDelayParams::scalar(-1.0, 0.0, 0.3, 0.0, 0.0, 0.5));
  s.initial = InitialData::constant({1.0});
  s.tau = 0.25;
  s.horizon = 1.0;
  s.intensity = 2.0;
  s.steps = {1.0 / 8, 1.0 / 16};
  s.moments = {2.0};
  s.num_paths = 48;
  s.master_seed = 11;
  s.reference.refinement_ratio = 8;
  return s;
}

}  // namespace

TEST_CASE("strong_error examples") {
  const PathGrid x = scalar_path({0.0, 1.0, 3.0});
  CHECK(strong_error(x, x, 2.0) == 0.0);
  CHECK(strong_error(x, scalar_path({0.5, 1.5, 3.5}), 2.0) == doctest::Approx(0.25));
  const PathGrid y = scalar_path({0.0, 2.0, 2.5});
  double brute = 0.0;
  for (std::size_t i = 0; i < 3; ++i) brute = std::max(brute, std::abs(x.node(i)[0] - y.node(i)[0]));
  CHECK(brute == 1.0);
  CHECK(strong_error(x, y, 2.0) == doctest::Approx(brute * brute));
  CHECK(sup_gap(x, y) == 1.0);
}

TEST_CASE("sup_gap ignores history and rejects mismatched grids") {
  PathGrid a(0.5, 1, 2, 1), b(0.5, 2, 2, 1);
  a.node(0)[0] = 100.0;
  b.node(0)[0] = -100.0;
  CHECK(sup_gap(a, b) == 0.0);
  CHECK_THROWS(sup_gap(a, PathGrid(0.25, 1, 4, 1)));
}

TEST_CASE("moment_bound_estimate examples") {
  const std::vector<PathGrid> zeros{scalar_path({0.0, 0.0}), scalar_path({0.0, 0.0})};
  CHECK(moment_bound_estimate(zeros, 2.0) == 0.0);
  const std::vector<PathGrid> constant{scalar_path({3.0, 3.0, 3.0})};
  CHECK(moment_bound_estimate(constant, 2.0) == doctest::Approx(9.0));
  const std::vector<PathGrid> two{scalar_path({1.0, -0.5}), scalar_path({0.0, -3.0})};
  CHECK(moment_bound_estimate(two, 2.0) == doctest::Approx(5.0));
}

TEST_CASE("fit_rate") {
  SUBCASE("exact half-order power law") {
    std::vector<RateEstimate::Point> pts;
    for (int k = 3; k <= 6; ++k) pts.push_back({std::ldexp(1.0, -k), std::pow(2.0, -k / 2.0)});
    const RateEstimate r = fit_rate(pts);
    CHECK(r.slope == doctest::Approx(0.5));
    CHECK(r.residual_norm == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("two points") {
    const std::vector<RateEstimate::Point> pts{{0.1, 0.1}, {0.01, 0.01}};
    CHECK(fit_rate(pts).slope == doctest::Approx(1.0));
  }
  SUBCASE("perturbed first-order data") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> eta(-0.1, 0.1);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<RateEstimate::Point> pts;
      for (int k = 3; k <= 8; ++k) pts.push_back({std::ldexp(1.0, -k), 3.0 * std::ldexp(1.0, -k) * (1.0 + eta(rng))});
      const RateEstimate r = fit_rate(pts);
      CHECK(r.slope == doctest::Approx(ols_slope(pts)).epsilon(1e-10));
      CHECK(r.slope >= 0.9);
      CHECK(r.slope <= 1.1);
    }
  }
  SUBCASE("rejects degenerate input") {
    const std::vector<RateEstimate::Point> one{{0.1, 0.1}};
    CHECK_THROWS_AS(fit_rate(one), ConfigError);
    const std::vector<RateEstimate::Point> zero{{0.1, 0.1}, {0.05, 0.0}};
    try {
      fit_rate(zero);
      FAIL("expected rejection");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("paths") != std::string::npos);
    }
  }
}

TEST_CASE("compensated statistics") {
  std::vector<double> values(1000001, 0.1);
  values[0] = 1e10;
  CHECK(compensated_sum(values) == doctest::Approx(1e10 + 100000.0).epsilon(1e-15));
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const MeanStat s = mean_and_std_error(v);
  CHECK(s.mean == 2.5);
  CHECK(s.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  const ErrorStat e = aggregate_error(v, 2.0, 0.1);
  CHECK(e.mean_sup_p == doctest::Approx(7.5));
  CHECK(e.root_error == doctest::Approx(std::sqrt(7.5)));
  CHECK(e.num_paths == 4);
}

TEST_CASE("parallel_for visits every index once and rethrows the first failure") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  try {
    parallel_for(100, 4, [](std::size_t i) {
      if (i == 37 || i == 80) throw std::runtime_error(std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "37");
  }
}

TEST_CASE("segment_interp_error examples") {
  SUBCASE("zero coefficients") {
    EmConfig cfg{zero_coefficients(1, 1), InitialData::constant({2.0}), 0.5, 1.0, 1, 1};
    cfg = cfg.with_step(0.25);
    const std::vector<NoiseLattice> noise{generate_lattice(1, 0, 1.0, 1.0 / 16, 1, 2.0)};
    const auto samples = draw_interp_samples(1, 0, 50, 16, 8);
    CHECK(segment_interp_error(cfg, noise, 2.0, samples).mean == 0.0);
  }
  SUBCASE("theta = 0 at a coarse node") {
    EmConfig cfg{linear_delay_coefficients(LinearDelayParams::scalar(-1, 0.5, 0.3, 0, 0.5, 0)),
                 InitialData::constant({1.0}), 0.5, 1.0, 1, 1};
    cfg = cfg.with_step(0.25);
    const std::vector<NoiseLattice> noise{generate_lattice(2, 0, 1.0, 1.0 / 16, 1, 2.0)};
    const std::vector<InterpSample> samples{{0, 0}, {4, 0}, {8, 0}, {12, 0}};
    CHECK(segment_interp_error(cfg, noise, 2.0, samples).mean == 0.0);
  }
  SUBCASE("unit drift on a two-cell instance") {
    CoefficientSet c = zero_coefficients(1, 1);
    c.drift = [](const SegmentView&, std::span<double> out) { out[0] = 1.0; };
    EmConfig cfg{c, InitialData::constant({0.0}), 1.0, 1.0, 1, 1};
    cfg = cfg.with_step(0.5);
    const std::vector<double> inc(4, 0.0);
    const std::vector<std::int64_t> counts(4, 0);
    const std::vector<NoiseLattice> noise{NoiseLattice::from_increments(1.0, 0.25, 1, 0.0, inc, counts, {})};
    // s = 0.75, theta = -0.25: y(0.5) = 0.5, while the window frozen at 0.5
    // interpolates y(0) = 0 and y(0.5) = 0.5 at 0.25, giving 0.25.
    const std::vector<InterpSample> samples{{3, 1}};
    CHECK(segment_interp_error(cfg, noise, 2.0, samples).mean == doctest::Approx(0.0625));
    CHECK(segment_interp_error(cfg, noise, 1.0, samples).mean == doctest::Approx(0.25));
  }
}

TEST_CASE("draw_interp_samples stays in range and is deterministic") {
  const auto a = draw_interp_samples(3, 7, 500, 64, 16);
  const auto b = draw_interp_samples(3, 7, 500, 64, 16);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].s_cells < 64);
    CHECK(a[i].theta_cells <= 16);
    CHECK(a[i].s_cells == b[i].s_cells);
    CHECK(a[i].theta_cells == b[i].theta_cells);
  }
}

TEST_CASE("study validation") {
  StudyConfig s = delayed_jump_study();
  CHECK_NOTHROW(s.validate());
  s.moments = {1.5};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = delayed_jump_study();
  s.reference.refinement_ratio = 4;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = delayed_jump_study();
  s.steps = {1.0 / 8, 3.0 / 64};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = delayed_jump_study();
  s.tau = 0.3;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = delayed_jump_study();
  s.reference.kind = ReferenceSpec::Kind::exact;
  s.coefficients = zero_coefficients(2, 1);
  s.initial = InitialData::constant({0.0, 0.0});
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("zero-coefficient study reports zero errors and skips the fit") {
  StudyConfig s = delayed_jump_study();
  s.coefficients = zero_coefficients(1, 1);
  const StudyReport r = convergence_study(s);
  for (const auto& row : r.rows) CHECK(row.mean_sup_p == 0.0);
  REQUIRE(r.rates.size() == 1);
  CHECK_FALSE(r.rates[0].root.has_value());
  CHECK_FALSE(r.rates[0].warning.empty());
  CHECK(rate_csv(r) == "p,slope,intercept,residual_norm\n");
}

TEST_CASE("single step size skips the fit but keeps the errors") {
  StudyConfig s = geometric_study();
  s.steps = {1.0 / 16};
  const StudyReport r = convergence_study(s);
  CHECK(r.rows.size() == 2);
  CHECK(r.rows[0].mean_sup_p > 0.0);
  CHECK_FALSE(r.rates[0].root.has_value());
  CHECK(r.rates[0].warning.find("single") != std::string::npos);
}

TEST_CASE("study report layout and invariants") {
  const StudyReport r = convergence_study(geometric_study());
  REQUIRE(r.rows.size() == 6);
  CHECK(r.rows[0].p == 2.0);
  CHECK(r.rows[3].p == 4.0);
  CHECK(r.rows[1].delta == 1.0 / 16);
  for (const auto& row : r.rows) {
    CHECK(row.mean_sup_p >= 0.0);
    CHECK(row.std_error >= 0.0);
    CHECK(row.root_error == doctest::Approx(std::pow(row.mean_sup_p, 1.0 / row.p)));
  }
  const std::string csv = study_report_csv(r);
  CHECK(csv.rfind("p,delta,num_paths,mean_sup_p,std_error,root_error\n2,0.125,64,", 0) == 0);
  CHECK(r.fine_step == 1.0 / 256);
}

TEST_CASE("study output does not depend on worker count") {
  StudyConfig s = delayed_jump_study();
  const std::string one = study_report_csv(convergence_study(s));
  s.workers = 3;
  CHECK(study_report_csv(convergence_study(s)) == one);
}

TEST_CASE("study is invariant under truncation above the observed path bound") {
  StudyConfig s = delayed_jump_study();
  const StudyReport base = convergence_study(s);
  s.coefficients = make_truncated(s.coefficients, base.max_path_sup * 1.01);
  const StudyReport truncated = convergence_study(s);
  CHECK(study_report_csv(truncated) == study_report_csv(base));
  CHECK(rate_csv(truncated) == rate_csv(base));
}

TEST_CASE("moment bound and interpolation studies produce one row per step") {
  StudyConfig s = delayed_jump_study();
  s.moments = {4.0};
  const auto rows = moment_bound_study(s);
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) CHECK(row.stat.mean >= 1.0);
  const auto interp = segment_interp_study(s, 2.0, 16);
  REQUIRE(interp.size() == 2);
  for (const auto& row : interp) CHECK(row.stat.mean > 0.0);
}
