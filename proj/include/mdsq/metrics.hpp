#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mdsq/qbd.hpp"
#include "mdsq/simulator.hpp"

namespace mdsq {

/// P(M = m) for m = 0..x_max.
std::vector<double> occupancy_pmf(const QbdBlocks& q, const StationaryDistribution& st, int x_max);

/// P(M > x) for x = 0..x_max, computed as 1 - P(M <= x).
std::vector<double> occupancy_ccdf(const QbdBlocks& q, const StationaryDistribution& st, int x_max);

/// Probability that an arriving batch (seeing the stationary state) leaves at
/// least one job in the buffer.
double waiting_probability(const QbdBlocks& q, const StationaryDistribution& st, const SystemConfig& cfg);

/// Expected latency d of a batch arriving in each retained pre-arrival state.
struct LatencyProfile {
  std::vector<ChainState> states;
  std::vector<double> d;
  int truncation_level = 0;  ///< last QBD level whose states are retained
  double tail_mass = 0.0;    ///< stationary mass of the states left out
};

/// Retains states in level order until their mass reaches 1 - tail, then
/// solves the tagged-batch absorption chain for each of them.
LatencyProfile latency_profile(const SystemConfig& cfg, const QbdBlocks& q, const StationaryDistribution& st,
                               double tail = 1e-8);

struct LatencyEstimate {
  double mean = 0.0;
  double tail_mass = 0.0;  ///< probability mass not covered by the sum
};

LatencyEstimate mean_latency(const LatencyProfile& profile, const QbdBlocks& q, const StationaryDistribution& st);

/// Analytic mean latency for a bounding policy; nullopt when cfg is unstable.
std::optional<LatencyEstimate> analytic_mean_latency(const SystemConfig& cfg, double tail = 1e-8);

struct ThroughputLossPoint {
  int n = 0;
  double lambda_star = 0.0;
  double loss = 0.0;  ///< (n mu / k - lambda*) / (n mu / k)
};

std::vector<ThroughputLossPoint> throughput_loss_curve(int k, int t, int n_min, int n_max, double mu = 1.0);

struct DegradedReadPoint {
  double lambda = 0.0;
  std::optional<MetricsReport> reconstruction;  ///< empty when lambda is at/above its limit
  std::optional<MetricsReport> repair;
};

struct DegradedReadComparison {
  SystemConfig reconstruction;  ///< MDS(n-1, k) at mu
  SystemConfig repair;          ///< MDS(n-1, d) at mu * repair_speedup
  double reconstruction_limit = 0.0;
  double repair_limit = 0.0;
  std::vector<DegradedReadPoint> points;
};

/// Simulates both degraded-read queues over the lambda grid. repair_speedup
/// <= 0 selects the default d - k + 1. replications >= 2 uses replicate().
DegradedReadComparison degraded_read_compare(int n, int k, int d, const std::vector<double>& lambdas, double mu,
                                             double repair_speedup, const SimulationOptions& opt,
                                             int replications = 1);

}  // namespace mdsq
