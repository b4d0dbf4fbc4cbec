#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <sstream>

#include "cfad/netmodel.hpp"
#include "cfad/rng.hpp"
#include "cfad/stats.hpp"

using namespace cfad;

TEST_CASE("torus distance wraps around the edges") {
  CHECK(torus_distance({0, 0}, {900, 0}, 1000) == doctest::Approx(100.0));
  CHECK(torus_distance({42, 77}, {42, 77}, 1000) == 0.0);
  CHECK(torus_distance({0, 0}, {500, 500}, 1000) ==
        doctest::Approx(500.0 * std::sqrt(2.0)));
  // inputs are reduced modulo the side
  CHECK(torus_distance({-100, 0}, {0, 0}, 1000) == doctest::Approx(100.0));
  CHECK(torus_distance({2300, 0}, {0, 0}, 1000) == doctest::Approx(300.0));
}

TEST_CASE("torus distance is a metric on sampled triples") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  for (int i = 0; i < 2000; ++i) {
    const Eigen::Vector2d p{u(rng), u(rng)}, q{u(rng), u(rng)}, r{u(rng), u(rng)};
    const double pq = torus_distance(p, q, 1000.0);
    const double qp = torus_distance(q, p, 1000.0);
    const double pr = torus_distance(p, r, 1000.0);
    const double rq = torus_distance(r, q, 1000.0);
    CHECK(pq == doctest::Approx(qp).epsilon(1e-12));
    CHECK(pq >= 0.0);
    CHECK(pq <= pr + rq + 1e-9);
  }
}

TEST_CASE("path loss model") {
  CHECK(path_loss_db(1.0, 0.0) == doctest::Approx(-30.5));
  CHECK(path_loss_db(100.0, 0.0) == doctest::Approx(-103.9));
  CHECK(path_loss_db(1000.0, 5.0) == doctest::Approx(-135.6));
  // distances below 1 m clamp to 1 m
  CHECK(path_loss_db(0.2, 0.0) == doctest::Approx(-30.5));
  CHECK(path_loss_db(0.0, 0.0) == doctest::Approx(-30.5));
  CHECK_THROWS_AS(path_loss_db(0.0, 0.0, /*clamp=*/false), std::invalid_argument);
  CHECK_THROWS_AS(path_loss_db(-3.0, 0.0, /*clamp=*/false), std::invalid_argument);
}

namespace {
SimParams small_params() {
  SimParams p;
  p.aps = 5;
  p.antennas = 2;
  p.users = 12;
  p.seq_len = 6;
  p.activation_prob = 0.1;
  p.area_side_m = 2000.0;
  p.shadow_var_db2 = 4.0;
  p.power = PowerPolicy::full_power();
  return p;
}
}  // namespace

TEST_CASE("generate_scenario is deterministic in (params, seed)") {
  const SimParams p = small_params();
  const Scenario a = generate_scenario(p, 99);
  const Scenario b = generate_scenario(p, 99);
  CHECK(a.ap_pos == b.ap_pos);
  CHECK(a.user_pos == b.user_pos);
  CHECK(a.beta == b.beta);
  CHECK(a.signatures == b.signatures);
  CHECK(a.rho == b.rho);

  // activation probability plays no role in the static realization
  SimParams p2 = p;
  p2.activation_prob = 0.0;
  const Scenario c = generate_scenario(p2, 99);
  CHECK(a.beta == c.beta);
  CHECK(a.signatures == c.signatures);

  const Scenario d = generate_scenario(p, 100);
  CHECK(a.beta != d.beta);
}

TEST_CASE("beta decreases with distance when shadowing is off") {
  SimParams p = small_params();
  p.shadow_var_db2 = 0.0;
  const Scenario scn = generate_scenario(p, 3);
  for (int m = 0; m < scn.aps(); ++m)
    for (int k = 0; k < scn.users(); ++k)
      for (int k2 = k + 1; k2 < scn.users(); ++k2) {
        const double d1 =
            torus_distance(scn.ap_pos.col(m), scn.user_pos.col(k), p.area_side_m);
        const double d2 =
            torus_distance(scn.ap_pos.col(m), scn.user_pos.col(k2), p.area_side_m);
        if (d1 < 1.0 || d2 < 1.0) continue;  // clamped region
        if (d1 < d2)
          CHECK(scn.beta(m, k) > scn.beta(m, k2));
        else if (d2 < d1)
          CHECK(scn.beta(m, k2) > scn.beta(m, k));
      }
}

TEST_CASE("beta is invariant under global translation modulo the torus") {
  const double side = 1000.0;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, side);
  Eigen::Matrix2Xd aps(2, 4), users(2, 9);
  for (int i = 0; i < aps.cols(); ++i) aps.col(i) << u(rng), u(rng);
  for (int i = 0; i < users.cols(); ++i) users.col(i) << u(rng), u(rng);
  Eigen::MatrixXd shadow = Eigen::MatrixXd::Random(4, 9) * 3.0;

  const Eigen::MatrixXd beta = large_scale_fading(aps, users, side, shadow);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Vector2d shift{u(rng), u(rng)};
    Eigen::Matrix2Xd aps2 = aps.colwise() + shift;
    Eigen::Matrix2Xd users2 = users.colwise() + shift;
    const Eigen::MatrixXd beta2 = large_scale_fading(aps2, users2, side, shadow);
    CHECK((beta - beta2).cwiseAbs().maxCoeff() <= 1e-9 * beta.maxCoeff());
  }
}

TEST_CASE("co-located mode: one site at the center with all antennas") {
  SimParams p = small_params();
  p.colocated = true;
  CHECK(p.effective_aps() == 1);
  CHECK(p.effective_antennas() == p.aps * p.antennas);
  const Scenario scn = generate_scenario(p, 5);
  CHECK(scn.aps() == 1);
  CHECK(scn.antennas == 10);
  CHECK(scn.ap_pos(0, 0) == doctest::Approx(1000.0));
  CHECK(scn.ap_pos(1, 0) == doctest::Approx(1000.0));
}

TEST_CASE("assign_powers") {
  Eigen::MatrixXd beta(2, 3);
  beta << 1e-8, 1e-12, 1e-15, 3e-9, 2e-12, 1e-16;
  const double sigma2 = dbm_to_watts(-109.0);

  SUBCASE("full power hits the 200 mW cap for everyone") {
    const Eigen::VectorXd rho =
        assign_powers(beta, PowerPolicy::full_power(), 0.2, sigma2);
    for (int k = 0; k < 3; ++k) CHECK(rho[k] == 0.2);
  }
  SUBCASE("target SNR backs off strong users and caps weak ones") {
    const double target_db = 10.0;
    const Eigen::VectorXd rho =
        assign_powers(beta, PowerPolicy::target_snr(target_db), 0.2, sigma2);
    // strongest link: wanted power is far below the cap
    CHECK(rho[0] == doctest::Approx(10.0 * sigma2 / 1e-8).epsilon(1e-12));
    CHECK(rho[0] < 0.2);
    // weakest link: in outage, transmits at full power
    CHECK(rho[2] == 0.2);
  }
  SUBCASE("outage silencing switch") {
    PowerPolicy policy = PowerPolicy::target_snr(10.0);
    policy.silence_in_outage = true;
    const Eigen::VectorXd rho = assign_powers(beta, policy, 0.2, sigma2);
    CHECK(rho[2] == 0.0);
    CHECK(rho[0] > 0.0);
  }
  SUBCASE("unresolved auto target is rejected") {
    PowerPolicy policy;  // target_snr with NaN target
    CHECK_THROWS_AS(assign_powers(beta, policy, 0.2, sigma2), std::invalid_argument);
  }
}

TEST_CASE("calibrate_snr_target") {
  SUBCASE("point mass when every distance clamps to 1 m") {
    SimParams p = small_params();
    p.aps = 1;
    p.area_side_m = 0.5;  // torus diameter < 1 m, all distances clamp
    p.shadow_var_db2 = 0.0;
    const double expected =
        linear_to_db(p.max_power_w * db_to_linear(-30.5) / p.noise_w());
    const double target = calibrate_snr_target(p, 1000, 0.05, 42);
    CHECK(target == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("quantile zero is the sample minimum") {
    SimParams p = small_params();
    const auto snr = [&] {
      auto v = sample_dominant_snr_db(p, 1500, 7);
      std::sort(v.begin(), v.end());
      return v;
    }();
    const double target = calibrate_snr_target(p, 1500, 0.0, 7);
    CHECK(target == doctest::Approx(snr.front()));
  }
  SUBCASE("cell-free target beats co-located on a 2x2 km area") {
    SimParams cellfree = small_params();
    cellfree.aps = 100;
    cellfree.antennas = 1;
    cellfree.users = 50;
    SimParams colocated = cellfree;
    colocated.colocated = true;
    const double t_cf = calibrate_snr_target(cellfree, 4000, 0.05, 21);
    const double t_co = calibrate_snr_target(colocated, 4000, 0.05, 21);
    CHECK(t_cf > t_co);
  }
  SUBCASE("rejects tiny calibration samples") {
    CHECK_THROWS_AS(calibrate_snr_target(small_params(), 10, 0.05, 1),
                    std::invalid_argument);
  }
}

TEST_CASE("sample_activity") {
  const auto none = sample_activity(50, 0.0, 1);
  CHECK(none.active_set.empty());
  const auto all = sample_activity(50, 1.0, 1);
  CHECK(all.active_set.size() == 50);

  // mean active count: eps=0.1, K=400 over 1e4 trials lands within 40 +- 2
  long total = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t)
    total += static_cast<long>(sample_activity(400, 0.1, 1000 + t).active_set.size());
  const double mean = static_cast<double>(total) / trials;
  CHECK(mean > 38.0);
  CHECK(mean < 42.0);
}

namespace {
Scenario tiny_scenario(std::uint64_t seed, double noise_dbm = -109.0, int users = 3,
                       int aps = 2, int seq_len = 4, int antennas = 2) {
  SimParams p;
  p.aps = aps;
  p.antennas = antennas;
  p.users = users;
  p.seq_len = seq_len;
  p.area_side_m = 500.0;
  p.shadow_var_db2 = 4.0;
  p.noise_dbm = noise_dbm;
  p.power = PowerPolicy::full_power();
  return generate_scenario(p, seed);
}
}  // namespace

TEST_CASE("synthesize_received: silent network is numerically zero") {
  Scenario scn = tiny_scenario(1, /*noise_dbm=*/-250.0);
  const std::vector<std::uint8_t> idle(3, 0);
  const ReceivedBatch batch = synthesize_received(scn, idle, 4, true);
  for (const auto& cov : batch.sample_cov) CHECK(cov.norm() <= 1e-20);
  for (const auto& y : batch.raw) CHECK(y.norm() <= 1e-10);
  CHECK(batch.active_set.empty());
}

TEST_CASE("synthesize_received: one user and no noise gives a rank-1 covariance") {
  Scenario scn = tiny_scenario(2, /*noise_dbm=*/-320.0, /*users=*/1, /*aps=*/1,
                               /*seq_len=*/5, /*antennas=*/3);
  const std::vector<std::uint8_t> act{1};
  const ReceivedBatch batch = synthesize_received(scn, act, 9, false);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(batch.sample_cov[0]);
  const Eigen::VectorXd ev = es.eigenvalues();
  CHECK(ev(ev.size() - 1) > 0.0);
  for (int i = 0; i + 1 < ev.size(); ++i)
    CHECK(std::fabs(ev(i)) <= 1e-10 * ev(ev.size() - 1));
}

TEST_CASE("synthesize_received: sample covariances are Hermitian PSD") {
  Scenario scn = tiny_scenario(3);
  const auto draw = sample_activity(3, 0.5, 17);
  const ReceivedBatch batch = synthesize_received(scn, draw.flags, 17, false);
  for (const auto& cov : batch.sample_cov) {
    CHECK((cov - cov.adjoint()).norm() <= 1e-12 * std::max(1.0, cov.norm()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(cov);
    const double trace = cov.trace().real();
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * trace);
  }
}

TEST_CASE("sample covariance converges to the model covariance") {
  // Monte-Carlo mean of Q_Y over many noise/channel draws vs the analytic
  // block S D_gamma D_beta S^H + sigma2 I, built here by hand.
  Scenario scn = tiny_scenario(5, -109.0, /*users=*/3, /*aps=*/2, /*seq_len=*/4,
                               /*antennas=*/2);
  const std::vector<std::uint8_t> act{1, 0, 1};

  const int n_draws = 10000;
  std::vector<Eigen::MatrixXcd> mean(2, Eigen::MatrixXcd::Zero(4, 4));
  for (int t = 0; t < n_draws; ++t) {
    const ReceivedBatch b = synthesize_received(scn, act, 50000 + t, false);
    for (int m = 0; m < 2; ++m) mean[m] += b.sample_cov[m];
  }
  for (int m = 0; m < 2; ++m) {
    mean[m] /= n_draws;
    Eigen::MatrixXcd expected = scn.sigma2 * Eigen::MatrixXcd::Identity(4, 4);
    for (int k = 0; k < 3; ++k) {
      if (!act[k]) continue;
      expected += scn.rho[k] * scn.beta(m, k) *
                  (scn.signatures.col(k) * scn.signatures.col(k).adjoint());
    }
    const double floor = 1e-3 * expected.trace().real() / 4.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const double err = std::abs(mean[m](i, j) - expected(i, j));
        CHECK(err <= 0.05 * (std::abs(expected(i, j)) + floor));
      }
  }
}

TEST_CASE("sample covariance error shrinks like 1/sqrt(N)") {
  Scenario scn = tiny_scenario(6, -109.0, 3, 1, 4, 512);
  const std::vector<std::uint8_t> act{1, 1, 0};
  const ReceivedBatch batch = synthesize_received(scn, act, 77, false);
  Eigen::MatrixXcd expected = scn.sigma2 * Eigen::MatrixXcd::Identity(4, 4);
  for (int k = 0; k < 3; ++k)
    if (act[k])
      expected += scn.rho[k] * scn.beta(0, k) *
                  (scn.signatures.col(k) * scn.signatures.col(k).adjoint());
  const double rel = (batch.sample_cov[0] - expected).norm() / expected.norm();
  CHECK(rel < 5.0 / std::sqrt(512.0));
}

TEST_CASE("build_clusters") {
  Eigen::MatrixXd beta(3, 2);
  beta << 0.1, 0.2, 0.5, 0.2, 0.3, 0.1;

  SUBCASE("T=1 is the argmax") {
    const ClusterMap map = build_clusters(beta, 1);
    CHECK(map.members[0] == std::vector<int>{1});
    CHECK(map.dominant(0) == 1);
  }
  SUBCASE("T=M is a permutation of all APs") {
    const ClusterMap map = build_clusters(beta, 3);
    CHECK(map.members[0] == std::vector<int>{1, 2, 0});
    std::vector<int> sorted = map.members[1];
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2});
  }
  SUBCASE("descending order with lowest-index tie break") {
    const ClusterMap map = build_clusters(beta, 2);
    CHECK(map.members[0] == std::vector<int>{1, 2});
    // column 1 has a tie between APs 0 and 1 at 0.2
    CHECK(map.members[1] == std::vector<int>{0, 1});
  }
  SUBCASE("requested size is capped at M") {
    const ClusterMap map = build_clusters(beta, 9);
    CHECK(map.cluster_size == 3);
  }
  SUBCASE("scaling beta leaves clusters unchanged") {
    const ClusterMap map = build_clusters(beta, 2);
    const ClusterMap scaled = build_clusters(1e7 * beta, 2);
    CHECK(map.members == scaled.members);
  }
}

TEST_CASE("scenario export lists APs and users") {
  Scenario scn = tiny_scenario(8);
  std::ostringstream os;
  export_scenario(scn, os);
  const std::string text = os.str();
  CHECK(text.find("ap 0 ") != std::string::npos);
  CHECK(text.find("user 2 ") != std::string::npos);
  CHECK(text.find("beta 1 2 ") != std::string::npos);

  const auto draw = sample_activity(3, 0.5, 3);
  const ReceivedBatch batch = synthesize_received(scn, draw.flags, 3, false);
  std::ostringstream ob;
  export_batch(batch, ob);
  CHECK(ob.str().find("activity 0 ") != std::string::npos);
}

TEST_CASE("invalid parameters are rejected") {
  SimParams p = small_params();
  p.users = 0;
  CHECK_THROWS_AS(generate_scenario(p, 1), std::invalid_argument);
  p = small_params();
  p.activation_prob = 1.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = small_params();
  p.area_side_m = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
