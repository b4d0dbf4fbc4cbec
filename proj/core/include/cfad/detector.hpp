#pragma once

#include <cstdint>
#include <vector>

#include "cfad/covkit.hpp"
#include "cfad/netmodel.hpp"

namespace cfad {

enum class Algorithm {
  dominant_ap,       // single strongest AP per device, closed-form step
  cluster,           // T strongest APs, polynomial step
  cluster_parallel,  // cluster steps solved per group from a snapshot
};

struct DetectorConfig {
  Algorithm algorithm = Algorithm::cluster;
  int cluster_size = 2;    // T; ignored by dominant_ap (acts as T=1)
  int groups = 1;          // G, group count for cluster_parallel.
                           // G=1 solves all K users from one snapshot per
                           // sweep (full parallelism); G=K is sweep-identical
                           // to the sequential cluster algorithm.
  int max_iterations = 10; // I
  std::uint64_t perm_seed = 0;
  bool cost_audit = false; // recompute the cost from scratch each sweep

  void validate(int aps, int users) const;
};

// Coordinate-descent activity detection. Starts from gamma = 0, sweeps the
// users in a fresh random permutation per iteration, and stops early when a
// sweep fails to lower the cost (returning the previous iterate).
GammaEstimate detect(const Scenario& scn, const ReceivedBatch& batch,
                     const ClusterMap& clusters, const DetectorConfig& cfg);

// Exhaustive grid minimization of the exact likelihood over per-coordinate
// gamma values {mult * rho_k}. Only for toy instances (K <= 6, M <= 2);
// larger inputs are refused. Oracle for the iterative detectors.
GammaEstimate run_reference_bruteforce(const Scenario& scn, const ReceivedBatch& batch,
                                       const std::vector<double>& rho_multipliers);

}  // namespace cfad
