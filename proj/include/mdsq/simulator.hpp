#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "mdsq/config.hpp"

namespace mdsq {

struct SimulationOptions {
  std::uint64_t seed = 1;
  long warmup_batches = 10'000;
  long horizon_batches = 1'000'000;  ///< batches [warmup, horizon) are measured
  std::size_t saturation_buffer = 1'000'000;
  int ci_groups = 32;  ///< batch-means groups for confidence intervals
};

struct MetricsReport {
  double mean_batch_latency = 0.0;
  double latency_ci = 0.0;
  std::map<double, double> latency_quantiles;  ///< 0.5, 0.9, 0.99, 0.999
  std::vector<double> occupancy_histogram;     ///< time fraction with m jobs in the system
  std::vector<double> arrival_occupancy;       ///< fraction of arrivals that saw m jobs
  double waiting_fraction = 0.0;
  double waiting_ci = 0.0;
  long completed_batches = 0;
  double observed_throughput = 0.0;
  double throughput_ci = 0.0;
  std::uint64_t seed = 0;
  long warmup_batches = 0;
  long horizon_batches = 0;
  long replications = 1;
  bool saturated = false;
  std::uint64_t distinct_violations = 0;
  std::uint64_t jobs_completed = 0;  ///< measured batches only

  double mean_occupancy() const;
};

/// One seeded run. Arrivals keep coming until every measured batch finishes.
MetricsReport simulate(const SystemConfig& cfg, const SimulationOptions& opt);

/// Independent runs with seeds base_seed + r, folded in index order; CI
/// half-widths are normal-approximation intervals across replications.
/// MDSQ_THREADS caps the worker count.
MetricsReport replicate(const SystemConfig& cfg, int replications, const SimulationOptions& opt);

/// Completed batches per unit time when the buffer never runs dry.
double measure_saturation_throughput(const SystemConfig& cfg, std::uint64_t seed, long horizon_batches);

/// Worker threads for replications: MDSQ_THREADS if set, else hardware concurrency.
int worker_threads();

}  // namespace mdsq
