#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cfad/metrics.hpp"

using namespace cfad;

TEST_CASE("threshold_detect on normalized gamma") {
  Eigen::VectorXd rho(2);
  rho << 0.2, 0.1;
  Eigen::VectorXd gamma(2);
  gamma << 0.5 * rho[0], 0.01 * rho[1];

  const Decisions d1 = threshold_detect(gamma, rho, 0.1);
  CHECK(d1.flags == std::vector<std::uint8_t>{1, 0});
  CHECK(d1.active_set == std::vector<int>{0});

  const Decisions all = threshold_detect(gamma, rho, 0.0);
  CHECK(all.active_set.size() == 2);

  const Decisions none = threshold_detect(gamma, rho, 1e9);
  CHECK(none.active_set.empty());
}

TEST_CASE("per-trial miss and false-alarm ratios") {
  // truth {1,2}, estimate {2,3}, K=5 (0-based here)
  const TrialContrib c = pmd_pfa({2, 3}, {1, 2}, 5);
  REQUIRE(c.pmd);
  REQUIRE(c.pfa);
  CHECK(*c.pmd == doctest::Approx(0.5));
  CHECK(*c.pfa == doctest::Approx(1.0 / 3.0));

  const TrialContrib perfect = pmd_pfa({1, 2}, {1, 2}, 5);
  CHECK(*perfect.pmd == 0.0);
  CHECK(*perfect.pfa == 0.0);

  const TrialContrib missed_all = pmd_pfa({}, {0, 4}, 5);
  CHECK(*missed_all.pmd == 1.0);
  CHECK(*missed_all.pfa == 0.0);

  // degenerate trials contribute nothing to the undefined side
  const TrialContrib no_active = pmd_pfa({1}, {}, 5);
  CHECK(!no_active.pmd);
  REQUIRE(no_active.pfa);
  CHECK(*no_active.pfa == doctest::Approx(0.2));

  const TrialContrib all_active = pmd_pfa({0, 1, 2}, {0, 1, 2}, 3);
  REQUIRE(all_active.pmd);
  CHECK(!all_active.pfa);
}

namespace {
GammaRecord make_record(std::initializer_list<double> gammas,
                        std::initializer_list<int> active, double rho = 1.0) {
  GammaRecord rec;
  rec.gamma = Eigen::VectorXd(static_cast<Eigen::Index>(gammas.size()));
  Eigen::Index i = 0;
  for (double g : gammas) rec.gamma[i++] = g;
  rec.rho = Eigen::VectorXd::Constant(rec.gamma.size(), rho);
  rec.active_set = active;
  return rec;
}
}  // namespace

TEST_CASE("roc_sweep on hand-built records") {
  SUBCASE("perfect estimate gives a zero-error band") {
    const std::vector<GammaRecord> recs{make_record({1.0, 0.0, 1.0}, {0, 2})};
    const RocCurve curve = roc_sweep(recs, {0.25, 0.5, 0.75});
    for (const auto& pt : curve.points) {
      CHECK(pt.pmd == 0.0);
      CHECK(pt.pfa == 0.0);
    }
  }
  SUBCASE("all-zero estimate misses everything without false alarms") {
    const std::vector<GammaRecord> recs{make_record({0.0, 0.0, 0.0}, {1})};
    const RocCurve curve = roc_sweep(recs, {0.1, 1.0});
    for (const auto& pt : curve.points) {
      CHECK(pt.pmd == 1.0);
      CHECK(pt.pfa == 0.0);
    }
  }
  SUBCASE("uniformly larger gamma on actives dominates pointwise") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<GammaRecord> weak, strong;
    for (int t = 0; t < 40; ++t) {
      GammaRecord rec;
      rec.gamma = Eigen::VectorXd(10);
      rec.rho = Eigen::VectorXd::Ones(10);
      for (int k = 0; k < 10; ++k) rec.gamma[k] = 0.3 * u(rng);
      rec.active_set = {0, 3, 7};
      weak.push_back(rec);
      for (int k : rec.active_set) rec.gamma[k] += 0.5;  // boost true actives only
      strong.push_back(rec);
    }
    const auto grid = log_threshold_grid(1e-3, 1.0, 20);
    const RocCurve cw = roc_sweep(weak, grid);
    const RocCurve cs = roc_sweep(strong, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(cs.points[i].pmd <= cw.points[i].pmd + 1e-12);
      CHECK(cs.points[i].pfa == doctest::Approx(cw.points[i].pfa));
    }
  }
}

TEST_CASE("roc curves are monotone in the threshold") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<GammaRecord> recs;
  for (int t = 0; t < 60; ++t) {
    GammaRecord rec;
    rec.gamma = Eigen::VectorXd(20);
    rec.rho = Eigen::VectorXd::Constant(20, 0.2);
    for (int k = 0; k < 20; ++k) {
      rec.gamma[k] = 0.2 * u(rng) * (u(rng) < 0.3 ? 1.0 : 0.05);
      if (u(rng) < 0.25) rec.active_set.push_back(k);
    }
    recs.push_back(std::move(rec));
  }
  const RocCurve curve = roc_sweep(recs, log_threshold_grid());
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    CHECK(curve.points[i].pfa <= curve.points[i - 1].pfa + 1e-12);
    CHECK(curve.points[i].pmd >= curve.points[i - 1].pmd - 1e-12);
    CHECK(curve.points[i].pfa >= 0.0);
    CHECK(curve.points[i].pmd <= 1.0);
  }
}

TEST_CASE("scaling gamma and rho together leaves the curve unchanged") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<GammaRecord> recs, scaled;
  for (int t = 0; t < 20; ++t) {
    GammaRecord rec;
    rec.gamma = Eigen::VectorXd(8);
    rec.rho = Eigen::VectorXd(8);
    for (int k = 0; k < 8; ++k) {
      rec.gamma[k] = u(rng);
      rec.rho[k] = 0.05 + u(rng);
      if (u(rng) < 0.3) rec.active_set.push_back(k);
    }
    recs.push_back(rec);
    rec.gamma *= 37.0;
    rec.rho *= 37.0;
    scaled.push_back(rec);
  }
  const auto grid = log_threshold_grid(1e-3, 2.0, 25);
  const RocCurve a = roc_sweep(recs, grid);
  const RocCurve b = roc_sweep(scaled, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(a.points[i].pmd == doctest::Approx(b.points[i].pmd));
    CHECK(a.points[i].pfa == doctest::Approx(b.points[i].pfa));
  }
}

TEST_CASE("degenerate ensembles never divide by zero") {
  // no active users anywhere: pmd is undefined, pfa well-defined
  const std::vector<GammaRecord> recs{make_record({0.5, 0.0}, {}),
                                      make_record({0.0, 0.0}, {})};
  const RocCurve curve = roc_sweep(recs, {0.1, 1.0, 10.0});
  for (const auto& pt : curve.points) {
    CHECK(std::isnan(pt.pmd));
    CHECK(pt.md_trials == 0);
    CHECK(pt.fa_trials == 2);
    CHECK(std::isfinite(pt.pfa));
  }
}

TEST_CASE("pmd_at_pfa interpolates along the curve") {
  RocCurve curve;
  curve.points = {{0.01, 0.0, 0.9, 1, 1},
                  {0.1, 0.1, 0.5, 1, 1},
                  {1.0, 0.3, 0.2, 1, 1}};
  curve.n_trials = 1;
  CHECK(pmd_at_pfa(curve, 0.1) == doctest::Approx(0.5));
  CHECK(pmd_at_pfa(curve, 0.2) == doctest::Approx(0.35));
  CHECK(pmd_at_pfa(curve, 0.0) == doctest::Approx(0.9));   // below range
  CHECK(pmd_at_pfa(curve, 0.9) == doctest::Approx(0.2));   // above range
}

TEST_CASE("snr_cdf") {
  SUBCASE("degenerate when all distances clamp") {
    SimParams p;
    p.aps = 1;
    p.antennas = 1;
    p.users = 10;
    p.seq_len = 2;
    p.area_side_m = 0.5;
    p.shadow_var_db2 = 0.0;
    const EmpiricalCdf cdf = snr_cdf(p, 1000, 3);
    CHECK(cdf.quantile(0.0) == doctest::Approx(cdf.quantile(1.0)));
    CHECK(cdf.cdf(cdf.samples.front() + 0.1) == 1.0);
    CHECK(cdf.cdf(cdf.samples.front() - 0.1) == 0.0);
  }
  SUBCASE("denser deployments shift the CDF right") {
    SimParams p;
    p.aps = 20;
    p.antennas = 1;
    p.users = 50;
    p.seq_len = 2;
    p.area_side_m = 2000.0;
    const EmpiricalCdf sparse = snr_cdf(p, 4000, 9);
    p.aps = 100;
    const EmpiricalCdf dense = snr_cdf(p, 4000, 9);
    for (double q : {0.05, 0.5, 0.95}) CHECK(dense.quantile(q) > sparse.quantile(q));
  }
  SUBCASE("matches the calibration path on shared samples") {
    SimParams p;
    p.aps = 10;
    p.antennas = 2;
    p.users = 30;
    p.seq_len = 4;
    p.area_side_m = 1000.0;
    const EmpiricalCdf cdf = snr_cdf(p, 2000, 17);
    const double target = calibrate_snr_target(p, 2000, 0.05, 17);
    CHECK(cdf.quantile(0.05) == doctest::Approx(target).epsilon(1e-12));
  }
}

TEST_CASE("csv writers use the fixed column order") {
  RocCurve curve;
  curve.points = {{0.1, 0.2, 0.3, 5, 5}};
  curve.n_trials = 5;
  std::ostringstream os;
  write_roc_csv(curve, os);
  CHECK(os.str() == "threshold,pfa,pmd\n0.1,0.2,0.3\n");

  EmpiricalCdf cdf;
  cdf.samples = {-3.0, 1.0};
  std::ostringstream oc;
  write_snr_cdf_csv(cdf, oc);
  CHECK(oc.str() == "snr_db,cdf\n-3,0.5\n1,1\n");
}
