#include <benchmark/benchmark.h>

#include <random>

#include "cfad/detector.hpp"
#include "cfad/fronthaul.hpp"
#include "cfad/polyroot.hpp"
#include "cfad/rng.hpp"

namespace {

using namespace cfad;

struct DeskInstance {
  Scenario scn;
  ReceivedBatch batch;
  ClusterMap clusters;
};

DeskInstance make_desk(int aps, int users, int seq_len, int cluster_size) {
  SimParams p;
  p.aps = aps;
  p.antennas = 2;
  p.users = users;
  p.seq_len = seq_len;
  p.activation_prob = 0.1;
  p.area_side_m = 2000.0;
  p.power = PowerPolicy::target_snr(10.0);
  DeskInstance inst;
  inst.scn = generate_scenario(p, 7);
  const auto draw = sample_activity(users, 0.1, 7);
  inst.batch = synthesize_received(inst.scn, draw.flags, 7, false);
  inst.clusters = build_clusters(inst.scn.beta, cluster_size);
  return inst;
}

void BM_Rank1Update(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  Eigen::VectorXcd s(dim);
  for (int i = 0; i < dim; ++i) s[i] = complex_gaussian(rng);
  CovState cov(1, dim, 1.0);
  double c = 0.25;
  for (auto _ : state) {
    cov.rank1_update(0, s, c);
    c = -c;  // keep the matrix bounded
    benchmark::DoNotOptimize(cov.qinv(0).data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Rank1Update)->Arg(20)->Arg(40);

void BM_QuadForms(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  std::mt19937_64 rng(4);
  Eigen::VectorXcd s(dim);
  for (int i = 0; i < dim; ++i) s[i] = complex_gaussian(rng);
  Eigen::MatrixXcd y(dim, 2);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < dim; ++i) y(i, j) = complex_gaussian(rng);
  const Eigen::MatrixXcd qy = (y * y.adjoint()) / 2.0;
  CovState cov(1, dim, 1.0);
  for (auto _ : state) {
    const QuadForms q = quad_forms(cov, 0, s, 1.0, qy);
    benchmark::DoNotOptimize(q);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_QuadForms)->Arg(20)->Arg(40);

void BM_ClusterStep(benchmark::State& state) {
  const int t = static_cast<int>(state.range(0));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ua(0.5, 20.0), ub(0.0, 40.0);
  std::vector<double> a(t), b(t);
  for (int m = 0; m < t; ++m) {
    a[m] = ua(rng);
    b[m] = ub(rng);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(cluster_step(a, b, 0.05));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ClusterStep)->DenseRange(1, 4);

void BM_DetectSweep(benchmark::State& state) {
  const int t = static_cast<int>(state.range(0));
  const DeskInstance inst = make_desk(20, 100, 20, std::max(t, 1));
  DetectorConfig cfg;
  cfg.algorithm = t == 0 ? Algorithm::dominant_ap : Algorithm::cluster;
  cfg.cluster_size = std::max(t, 1);
  cfg.max_iterations = 10;
  for (auto _ : state) {
    cfg.perm_seed++;
    benchmark::DoNotOptimize(detect(inst.scn, inst.batch, inst.clusters, cfg));
  }
  state.SetItemsProcessed(state.iterations());
  state.SetLabel(t == 0 ? "dominant_ap" : "cluster T=" + std::to_string(t));
}
BENCHMARK(BM_DetectSweep)->Arg(0)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_DetectGrouped(benchmark::State& state) {
  const DeskInstance inst = make_desk(20, 100, 20, 2);
  DetectorConfig cfg;
  cfg.algorithm = Algorithm::cluster_parallel;
  cfg.cluster_size = 2;
  cfg.groups = static_cast<int>(state.range(0));
  cfg.max_iterations = 10;
  for (auto _ : state) {
    cfg.perm_seed++;
    benchmark::DoNotOptimize(detect(inst.scn, inst.batch, inst.clusters, cfg));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DetectGrouped)->Arg(1)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_MinifloatEncode(benchmark::State& state) {
  const MinifloatFormat fmt = MinifloatFormat::with_default_mantissa(20);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  std::vector<double> values(1024);
  for (auto& v : values) v = u(rng);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(minifloat_encode(values[i++ & 1023], fmt));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_MinifloatEncode);

}  // namespace

BENCHMARK_MAIN();
