#include "mdsq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace mdsq {

using Eigen::RowVectorXd;

std::vector<double> occupancy_pmf(const QbdBlocks& q, const StationaryDistribution& st, int x_max) {
  std::vector<double> p(std::max(0, x_max + 1), 0.0);
  for (int i = 0; i < q.qb(); ++i)
    if (q.boundary[i].m <= x_max) p[q.boundary[i].m] += st.pi_boundary(i);
  RowVectorXd lvl = st.pi_level1;
  for (int j = 1; q.boundary_top + (j - 1) * q.level_width < x_max; ++j) {
    for (int i = 0; i < q.ql(); ++i) {
      const int m = q.level[i].m + (j - 1) * q.level_width;
      if (m <= x_max) p[m] += lvl(i);
    }
    lvl = lvl * st.R;
  }
  for (double& v : p) v = std::max(v, 0.0);
  return p;
}

std::vector<double> occupancy_ccdf(const QbdBlocks& q, const StationaryDistribution& st, int x_max) {
  const auto pmf = occupancy_pmf(q, st, x_max);
  std::vector<double> out(pmf.size());
  double cum = 0.0;
  for (std::size_t x = 0; x < pmf.size(); ++x) {
    cum += pmf[x];
    out[x] = std::max(0.0, 1.0 - cum);
  }
  return out;
}

namespace {

bool arrival_waits(const ChainState& s, const SystemConfig& cfg) {
  for (const auto& e : chain_events(s, cfg))
    if (e.arrival) return e.new_batch_buffered > 0;
  return false;
}

}  // namespace

double waiting_probability(const QbdBlocks& q, const StationaryDistribution& st, const SystemConfig& cfg) {
  double p = 0.0;
  for (int i = 0; i < q.qb(); ++i)
    if (arrival_waits(q.boundary[i], cfg)) p += st.pi_boundary(i);
  const RowVectorXd all_levels = st.levels_from(1);
  for (int i = 0; i < q.ql(); ++i) {
    const bool waits = arrival_waits(q.level[i], cfg);
    if (waits != arrival_waits(q.state_at(2, i), cfg))
      throw ChainBuildError("arrival outcome differs between levels");
    if (waits) p += all_levels(i);
  }
  return p;
}

namespace {

struct TaggedKey {
  ChainState x;
  int behind = 0;  ///< buffered batches that arrived after the tagged one
  int c = 0;       ///< tagged jobs already completed
  bool operator==(const TaggedKey&) const = default;
};

struct TaggedKeyHash {
  std::size_t operator()(const TaggedKey& k) const noexcept {
    return ChainStateHash{}(k.x) * 31 + static_cast<std::size_t>(k.behind) * 131 + k.c;
  }
};

// Absorbing chain of one tagged batch. A node's value is its expected
// remaining latency; leaving the buffer with j jobs unfinished is worth H_j/mu.
class TaggedChain {
 public:
  explicit TaggedChain(const SystemConfig& cfg) : cfg_(cfg), mkmn_(cfg.policy == PolicyKind::MkMn) {}

  struct Start {
    int node = -1;       ///< node index, or -1 when `value` is final
    double value = 0.0;
  };

  Start start_from(const ChainState& pre) {
    for (auto& e : chain_events(pre, cfg_)) {
      if (!e.arrival) continue;
      if (e.new_batch_buffered == 0) return {-1, fresh(cfg_.k)};
      return follow({std::move(e.to), 0, 0});
    }
    throw ChainBuildError("state without an arrival event");
  }

  std::vector<double> solve() {
    for (std::size_t i = 0; i < nodes_.size(); ++i) expand(static_cast<int>(i));
    const int N = static_cast<int>(nodes_.size());
    std::vector<double> d(N, 0.0);
    if (N == 0) return d;
    if (!mkmn_) {
      // Without arrivals every move lowers m: solve bottom-up.
      std::vector<int> order(N);
      for (int i = 0; i < N; ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](int a, int b) { return keys_[a].x.m < keys_[b].x.m; });
      for (int i : order) {
        const Node& nd = nodes_[i];
        double acc = 1.0 + nd.absorb;
        for (const auto& [to, rate] : nd.edges) acc += rate * d[to];
        d[i] = acc / nd.out_rate;
      }
      return d;
    }
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs(N);
    for (int i = 0; i < N; ++i) {
      const Node& nd = nodes_[i];
      trip.emplace_back(i, i, nd.out_rate);
      for (const auto& [to, rate] : nd.edges) trip.emplace_back(i, to, -rate);
      rhs(i) = 1.0 + nd.absorb;
    }
    Eigen::SparseMatrix<double> A(N, N);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw std::runtime_error("tagged-batch system is singular");
    const Eigen::VectorXd x = lu.solve(rhs);
    for (int i = 0; i < N; ++i) d[i] = x(i);
    return d;
  }

 private:
  struct Node {
    double out_rate = 0.0;
    double absorb = 0.0;  ///< sum of rate * value over absorbing moves
    std::vector<std::pair<int, double>> edges;
  };

  double fresh(int unfinished) const { return harmonic(unfinished) / cfg_.service_rate; }

  // Once t batches queue behind the tagged one the buffer stays above depth t
  // until the tagged batch has fully started: every completion hands the head
  // buffered job to the freed server. Value over (J jobs up to and including
  // the tagged batch, tagged jobs buffered <= wt0, c completed).
  double relaxed_value(int J, int wt0, int c) {
    auto& table = relaxed_[wt0];
    const int k = cfg_.k, n = cfg_.n;
    while (static_cast<int>(table.size()) <= J) {
      const int j = static_cast<int>(table.size());
      std::vector<double> row(k + 1, 0.0);
      for (int cc = 0; cc <= k; ++cc) {
        if (j == 0) {
          row[cc] = fresh(k - cc);
          continue;
        }
        const int a = std::max(0, k - std::min(j, wt0) - cc);
        const double up = cc + 1 <= k ? table[j - 1][cc + 1] : 0.0;
        row[cc] = 1.0 / (n * cfg_.service_rate) + (double(a) / n) * up + (double(n - a) / n) * table[j - 1][cc];
      }
      table.push_back(std::move(row));
    }
    return table[J][c];
  }

  // Either the index of a live node or a terminal value for `key`.
  Start follow(TaggedKey key) {
    if (mkmn_ && key.behind >= cfg_.t) {
      const FullConfiguration fc = decode_state(key.x, cfg_);
      const int p = fc.b - key.behind;
      int J = 0;
      for (int i = 0; i < p; ++i) J += fc.batches[i].waiting;
      return {-1, relaxed_value(J, fc.batches[p - 1].waiting, key.c)};
    }
    auto [it, inserted] = index_.try_emplace(key, static_cast<int>(keys_.size()));
    if (inserted) {
      keys_.push_back(std::move(key));
      nodes_.emplace_back();
    }
    return {it->second, 0.0};
  }

  void add(int from, double rate, const Start& target) {
    if (rate <= 0.0) return;
    nodes_[from].out_rate += rate;
    if (target.node < 0) nodes_[from].absorb += rate * target.value;
    else nodes_[from].edges.emplace_back(target.node, rate);
  }

  void expand(int i) {
    const TaggedKey key = keys_[i];
    const FullConfiguration fc = decode_state(key.x, cfg_);
    const int k = cfg_.k, p = fc.b - key.behind;
    if (p < 1) throw ChainBuildError("tagged batch lost from the buffer");
    const int tagged_busy = k - fc.batches[p - 1].waiting - key.c;
    const double mu = cfg_.service_rate;
    for (const auto& e : chain_events(key.x, cfg_)) {
      if (e.arrival) {
        if (!mkmn_) continue;
        const double rate = cfg_.arrival_rate;
        if (e.first_cleared && p == 1) {
          add(i, rate, {-1, fresh(k - key.c)});
        } else {
          add(i, rate, follow({e.to, key.behind + (e.new_batch_buffered > 0 ? 1 : 0), key.c}));
        }
        continue;
      }
      // Departure: split off the completions that belong to the tagged batch.
      int tagged = 0;
      if (e.server_class == kAnyServer) tagged = std::min(tagged_busy, e.servers);
      else if (e.server_class == p) tagged = e.servers;
      for (int own = 0; own <= 1; ++own) {
        const int servers = own ? tagged : e.servers - tagged;
        if (servers == 0) continue;
        const int c = key.c + own;
        if (e.first_cleared && p == 1) add(i, servers * mu, {-1, fresh(k - c)});
        else add(i, servers * mu, follow({e.to, key.behind, c}));
      }
    }
    if (nodes_[i].out_rate <= 0.0) throw ChainBuildError("tagged batch can never leave");
  }

  SystemConfig cfg_;
  bool mkmn_;
  std::unordered_map<TaggedKey, int, TaggedKeyHash> index_;
  std::vector<TaggedKey> keys_;
  std::vector<Node> nodes_;
  std::unordered_map<int, std::vector<std::vector<double>>> relaxed_;
};

}  // namespace

LatencyProfile latency_profile(const SystemConfig& cfg, const QbdBlocks& q, const StationaryDistribution& st,
                               double tail) {
  cfg.validate();
  LatencyProfile prof;
  double mass = st.boundary_mass();
  prof.states = q.boundary;
  RowVectorXd lvl = st.pi_level1;
  for (int j = 1; mass < 1.0 - tail; ++j) {
    for (int i = 0; i < q.ql(); ++i) prof.states.push_back(q.state_at(j, i));
    mass += lvl.sum();
    lvl = lvl * st.R;
    prof.truncation_level = j;
    if (j > 10'000'000) throw std::runtime_error("latency truncation did not reach the tail target");
  }
  prof.tail_mass = std::max(0.0, 1.0 - mass);

  TaggedChain chain(cfg);
  std::vector<TaggedChain::Start> starts;
  starts.reserve(prof.states.size());
  for (const auto& s : prof.states) starts.push_back(chain.start_from(s));
  const auto d = chain.solve();
  prof.d.reserve(starts.size());
  for (const auto& s : starts) prof.d.push_back(s.node < 0 ? s.value : d[s.node]);
  return prof;
}

LatencyEstimate mean_latency(const LatencyProfile& profile, const QbdBlocks& q, const StationaryDistribution& st) {
  LatencyEstimate est;
  est.tail_mass = profile.tail_mass;
  const std::size_t qb = q.boundary.size();
  for (std::size_t i = 0; i < qb && i < profile.states.size(); ++i) est.mean += st.pi_boundary(i) * profile.d[i];
  RowVectorXd lvl = st.pi_level1;
  for (std::size_t base = qb; base < profile.states.size(); base += q.level.size()) {
    for (int i = 0; i < q.ql(); ++i) est.mean += lvl(i) * profile.d[base + i];
    lvl = lvl * st.R;
  }
  return est;
}

std::optional<LatencyEstimate> analytic_mean_latency(const SystemConfig& cfg, double tail) {
  const QbdBlocks q = build_qbd(cfg);
  if (!drift(q).stable()) return std::nullopt;
  const auto st = stationary(q);
  return mean_latency(latency_profile(cfg, q, st, tail), q, st);
}

std::vector<ThroughputLossPoint> throughput_loss_curve(int k, int t, int n_min, int n_max, double mu) {
  if (k < 2 || t < 1) throw ConfigError("throughput loss needs k >= 2 and t >= 1");
  std::vector<ThroughputLossPoint> out;
  for (int n = std::max(n_min, k); n <= n_max; ++n) {
    SystemConfig c;
    c.n = n;
    c.k = k;
    c.t = t;
    c.service_rate = mu;
    c.policy = PolicyKind::Reservation;
    const double cap = n * mu / k;
    const double ls = max_throughput(c);
    out.push_back({n, ls, (cap - ls) / cap});
  }
  return out;
}

DegradedReadComparison degraded_read_compare(int n, int k, int d, const std::vector<double>& lambdas, double mu,
                                             double repair_speedup, const SimulationOptions& opt,
                                             int replications) {
  if (!(k <= d && d <= n - 1)) throw ConfigError("degraded reads need k <= d <= n - 1");
  if (repair_speedup <= 0.0) repair_speedup = d - k + 1;
  DegradedReadComparison out;
  out.reconstruction.n = n - 1;
  out.reconstruction.k = k;
  out.reconstruction.service_rate = mu;
  out.repair.n = n - 1;
  out.repair.k = d;
  out.repair.service_rate = mu * repair_speedup;
  out.reconstruction_limit = (n - 1) * mu / k;
  out.repair_limit = (n - 1) * mu * repair_speedup / d;
  auto run = [&](const SystemConfig& base, double lambda, double limit) -> std::optional<MetricsReport> {
    if (lambda >= limit) return std::nullopt;
    const SystemConfig c = base.with_rate(lambda);
    return replications >= 2 ? replicate(c, replications, opt) : simulate(c, opt);
  };
  for (double lambda : lambdas)
    out.points.push_back({lambda, run(out.reconstruction, lambda, out.reconstruction_limit),
                          run(out.repair, lambda, out.repair_limit)});
  return out;
}

}  // namespace mdsq
