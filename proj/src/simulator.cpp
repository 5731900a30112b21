#include "mdsq/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <limits>
#include <numeric>
#include <string>
#include <thread>

#include "mdsq/policies.hpp"
#include "mdsq/rng.hpp"

namespace mdsq {

double MetricsReport::mean_occupancy() const {
  double m = 0.0;
  for (std::size_t i = 0; i < occupancy_histogram.size(); ++i) m += i * occupancy_histogram[i];
  return m;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZ95 = 1.959963984540054;

struct OpenBatch {
  double arrival = 0.0;
  int done = 0;
  std::vector<char> jobs_done;
};

// Batch-means half-width over `groups` contiguous groups of `xs`.
double batch_means_halfwidth(const std::vector<double>& xs, int groups) {
  const std::size_t n = xs.size();
  if (groups < 2 || n < static_cast<std::size_t>(groups)) return kInf;
  const std::size_t per = n / groups;
  std::vector<double> means(groups, 0.0);
  for (int g = 0; g < groups; ++g) {
    const std::size_t lo = g * per, hi = g + 1 == groups ? n : lo + per;
    means[g] = std::accumulate(xs.begin() + lo, xs.begin() + hi, 0.0) / (hi - lo);
  }
  const double mean = std::accumulate(means.begin(), means.end(), 0.0) / groups;
  double ss = 0.0;
  for (double v : means) ss += (v - mean) * (v - mean);
  return kZ95 * std::sqrt(ss / (groups - 1) / groups);
}

double nearest_rank(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  auto idx = static_cast<std::size_t>(std::ceil(q * sorted.size()));
  return sorted[std::clamp<std::size_t>(idx, 1, sorted.size()) - 1];
}

void bump(std::vector<double>& hist, int m, double w) {
  if (static_cast<int>(hist.size()) <= m) hist.resize(m + 1, 0.0);
  hist[m] += w;
}

void normalize(std::vector<double>& hist) {
  const double total = std::accumulate(hist.begin(), hist.end(), 0.0);
  if (total > 0.0)
    for (double& v : hist) v /= total;
}

}  // namespace

MetricsReport simulate(const SystemConfig& cfg, const SimulationOptions& opt) {
  cfg.validate();
  if (opt.warmup_batches < 0 || opt.horizon_batches <= opt.warmup_batches)
    throw ConfigError("simulation needs horizon_batches > warmup_batches >= 0");
  const int n = cfg.n, k = cfg.k;
  const auto W = static_cast<std::uint64_t>(opt.warmup_batches);
  const auto H = static_cast<std::uint64_t>(opt.horizon_batches);
  const std::size_t measured = H - W;

  SimState st(n);
  RandomStream arrivals(opt.seed, kArrivalStream);
  std::vector<RandomStream> service;
  for (int s = 0; s < n; ++s) service.emplace_back(opt.seed, server_stream(s));
  std::vector<double> finish(n, kInf);
  std::vector<Assignment> started;
  auto schedule = [&]() {
    for (const auto& a : started) finish[a.server] = st.clock + service[a.server].exponential(cfg.service_rate);
    started.clear();
  };

  MetricsReport rep;
  rep.seed = opt.seed;
  rep.warmup_batches = opt.warmup_batches;
  rep.horizon_batches = opt.horizon_batches;

  std::deque<OpenBatch> open;
  std::uint64_t open_base = 0;
  std::vector<double> latency(measured, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> waited(measured, 0.0);
  std::vector<double> window_completions;
  std::size_t measured_done = 0;
  bool in_window = false;
  double window_start = 0.0, window_end = 0.0;
  int m = 0;
  double next_arrival = arrivals.exponential(cfg.arrival_rate);

  while (measured_done < measured) {
    const auto it = std::min_element(finish.begin(), finish.end());
    const bool is_arrival = next_arrival <= *it;
    const double now = is_arrival ? next_arrival : *it;
    if (in_window) bump(rep.occupancy_histogram, m, now - st.clock);
    st.clock = now;

    if (is_arrival) {
      const std::uint64_t id = st.next_batch_id;
      if (id == W) in_window = true, window_start = now;
      if (id == H) in_window = false, window_end = now;
      if (id >= W && id < H) bump(rep.arrival_occupancy, m, 1.0);
      const ArrivalOutcome out = apply_arrival(st, cfg, &started);
      m += k;
      open.push_back({now, 0, std::vector<char>(k, 0)});
      if (id >= W && id < H) waited[id - W] = out.left_buffered > 0 ? 1.0 : 0.0;
      schedule();
      next_arrival = now + arrivals.exponential(cfg.arrival_rate);
      if (st.buffer.size() > opt.saturation_buffer) {
        rep.saturated = true;
        break;
      }
    } else {
      const int server = static_cast<int>(it - finish.begin());
      const ServerSlot slot = st.servers[server];
      finish[server] = kInf;
      apply_departure(st, server, cfg, &started);
      m -= 1;
      schedule();
      OpenBatch& ob = open[slot.batch - open_base];
      if (ob.jobs_done[slot.job]) throw PolicyError("job completed twice");
      ob.jobs_done[slot.job] = 1;
      if (++ob.done == k) {
        if (in_window) window_completions.push_back(now);
        if (slot.batch >= W && slot.batch < H) {
          latency[slot.batch - W] = now - ob.arrival;
          rep.jobs_completed += k;
          ++measured_done;
        }
        while (!open.empty() && open.front().done == k) open.pop_front(), ++open_base;
      }
    }
  }
  if (in_window || window_end == 0.0) window_end = st.clock;

  std::vector<double> lat, wait;
  for (std::size_t i = 0; i < measured; ++i)
    if (!std::isnan(latency[i])) lat.push_back(latency[i]), wait.push_back(waited[i]);
  rep.completed_batches = static_cast<long>(lat.size());
  rep.distinct_violations = st.distinct_violations;
  if (!lat.empty()) {
    rep.mean_batch_latency = std::accumulate(lat.begin(), lat.end(), 0.0) / lat.size();
    rep.latency_ci = batch_means_halfwidth(lat, opt.ci_groups);
    rep.waiting_fraction = std::accumulate(wait.begin(), wait.end(), 0.0) / wait.size();
    rep.waiting_ci = batch_means_halfwidth(wait, opt.ci_groups);
    std::vector<double> sorted = lat;
    std::sort(sorted.begin(), sorted.end());
    for (double q : {0.5, 0.9, 0.99, 0.999}) rep.latency_quantiles[q] = nearest_rank(sorted, q);
  } else {
    rep.mean_batch_latency = rep.latency_ci = rep.waiting_fraction = rep.waiting_ci =
        std::numeric_limits<double>::quiet_NaN();
  }
  const double span = window_end - window_start;
  if (span > 0.0) {
    rep.observed_throughput = window_completions.size() / span;
    // Throughput per equal time slice of the window.
    const int g = opt.ci_groups;
    std::vector<double> slices(g, 0.0);
    for (double tc : window_completions)
      slices[std::min(g - 1, static_cast<int>((tc - window_start) / span * g))] += 1.0;
    double mean = 0.0, ss = 0.0;
    for (double& v : slices) v /= span / g, mean += v / g;
    for (double v : slices) ss += (v - mean) * (v - mean);
    rep.throughput_ci = kZ95 * std::sqrt(ss / (g - 1) / g);
  }
  normalize(rep.occupancy_histogram);
  normalize(rep.arrival_occupancy);
  return rep;
}

int worker_threads() {
  if (const char* env = std::getenv("MDSQ_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

MetricsReport replicate(const SystemConfig& cfg, int replications, const SimulationOptions& opt) {
  if (replications < 2) throw ConfigError("replicate needs at least 2 replications");
  std::vector<MetricsReport> runs(replications);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int r = next++; r < replications; r = next++) {
      SimulationOptions o = opt;
      o.seed = opt.seed + static_cast<std::uint64_t>(r);
      runs[r] = simulate(cfg, o);
    }
  };
  const int threads = std::min(worker_threads(), replications);
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  auto mean_ci = [&](auto get, double& mean, double& ci) {
    mean = 0.0;
    for (const auto& r : runs) mean += get(r) / replications;
    double ss = 0.0;
    for (const auto& r : runs) ss += (get(r) - mean) * (get(r) - mean);
    ci = kZ95 * std::sqrt(ss / (replications - 1) / replications);
  };
  MetricsReport agg;
  agg.seed = opt.seed;
  agg.warmup_batches = opt.warmup_batches;
  agg.horizon_batches = opt.horizon_batches;
  agg.replications = replications;
  mean_ci([](const MetricsReport& r) { return r.mean_batch_latency; }, agg.mean_batch_latency, agg.latency_ci);
  mean_ci([](const MetricsReport& r) { return r.waiting_fraction; }, agg.waiting_fraction, agg.waiting_ci);
  mean_ci([](const MetricsReport& r) { return r.observed_throughput; }, agg.observed_throughput,
          agg.throughput_ci);
  for (const auto& r : runs) {
    agg.completed_batches += r.completed_batches;
    agg.saturated = agg.saturated || r.saturated;
    agg.distinct_violations += r.distinct_violations;
    agg.jobs_completed += r.jobs_completed;
    for (const auto& [q, v] : r.latency_quantiles) agg.latency_quantiles[q] += v / replications;
    for (std::size_t i = 0; i < r.occupancy_histogram.size(); ++i)
      bump(agg.occupancy_histogram, static_cast<int>(i), r.occupancy_histogram[i] / replications);
    for (std::size_t i = 0; i < r.arrival_occupancy.size(); ++i)
      bump(agg.arrival_occupancy, static_cast<int>(i), r.arrival_occupancy[i] / replications);
  }
  return agg;
}

double measure_saturation_throughput(const SystemConfig& cfg, std::uint64_t seed, long horizon_batches) {
  cfg.validate_allow_idle();
  if (horizon_batches < 1) throw ConfigError("horizon_batches must be >= 1");
  const int n = cfg.n, k = cfg.k;
  const std::size_t backlog = 4 * static_cast<std::size_t>(n) + cfg.t + 2;
  SimState st(n);
  std::vector<RandomStream> service;
  for (int s = 0; s < n; ++s) service.emplace_back(seed, server_stream(s));
  std::vector<double> finish(n, kInf);
  std::vector<Assignment> started;
  std::deque<int> done;
  std::uint64_t base = 0;

  auto top_up = [&]() {
    while (st.buffer.size() < backlog) {
      apply_arrival(st, cfg, &started);
      done.push_back(0);
    }
    // An idle server under MDS has served every waiting batch; a deeper
    // backlog always holds one more batch for it.
    for (int guard = 0; cfg.policy == PolicyKind::Mds && st.idle_count() > 0 && guard < 4 * n; ++guard) {
      apply_arrival(st, cfg, &started);
      done.push_back(0);
    }
    for (const auto& a : started) finish[a.server] = st.clock + service[a.server].exponential(cfg.service_rate);
    started.clear();
  };
  top_up();

  const long warmup = std::max(1L, horizon_batches / 10);
  long completed = 0;
  double t_start = 0.0;
  while (completed < warmup + horizon_batches) {
    const auto it = std::min_element(finish.begin(), finish.end());
    if (*it == kInf) throw PolicyError("saturated system has no busy server");
    st.clock = *it;
    const int server = static_cast<int>(it - finish.begin());
    const std::uint64_t batch = st.servers[server].batch;
    finish[server] = kInf;
    apply_departure(st, server, cfg, &started);
    if (++done[batch - base] == k) {
      if (++completed == warmup) t_start = st.clock;
      while (!done.empty() && done.front() == k) done.pop_front(), ++base;
    }
    top_up();
  }
  return horizon_batches / (st.clock - t_start);
}

}  // namespace mdsq
