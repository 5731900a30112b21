#include "mdsq/chain.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <string>
#include <unordered_set>

namespace mdsq {

namespace {

// Mutable view of a configuration while an event is applied. Only the buffered
// counts and the idle-server count are needed to re-encode.
struct Work {
  int m = 0;
  int z = 0;
  std::vector<int> waiting;
  bool first_cleared = false;

  void pop_front() {
    waiting.erase(waiting.begin());
    first_cleared = true;
  }
  // Starts up to `avail` jobs of a new batch; returns the count left buffered.
  int admit_new_batch(int k) {
    const int a = std::min(z, k);
    z -= a;
    if (k - a > 0) waiting.push_back(k - a);
    return k - a;
  }
};

Work from_config(const FullConfiguration& fc) {
  Work w;
  w.m = fc.m;
  w.z = fc.z;
  for (const auto& bt : fc.batches) w.waiting.push_back(bt.waiting);
  return w;
}

std::string describe(const ChainState& s) {
  std::string out = "(";
  for (int v : s.w) out += std::to_string(v) + ",";
  return out + "m=" + std::to_string(s.m) + ")";
}

// Re-encodes and checks that decoding recovers the same idle count and buffer.
ChainState encode(const Work& w, const ChainState& from, const SystemConfig& cfg) {
  ChainState s;
  s.m = w.m;
  s.w.assign(cfg.t, 0);
  for (int i = 0; i < cfg.t && i < static_cast<int>(w.waiting.size()); ++i) s.w[i] = w.waiting[i];
  auto fc = try_decode_state(s, cfg);
  bool ok = fc && fc->z == w.z && fc->b == static_cast<int>(w.waiting.size());
  if (ok)
    for (std::size_t i = 0; i < w.waiting.size(); ++i) ok = ok && fc->batches[i].waiting == w.waiting[i];
  if (!ok)
    throw ChainBuildError("compressed encoding lost information on a transition from " + describe(from) +
                          " to " + describe(s) + " under " + policy_label(cfg));
  return s;
}

ChainEvent departure(const Work& w, const ChainState& from, const SystemConfig& cfg, int servers,
                     int cls) {
  ChainEvent e;
  e.servers = servers;
  e.server_class = cls;
  e.to = encode(w, from, cfg);
  e.first_cleared = w.first_cleared;
  return e;
}

ChainEvent arrival(const Work& w, const ChainState& from, const SystemConfig& cfg, int buffered) {
  ChainEvent e;
  e.arrival = true;
  e.to = encode(w, from, cfg);
  e.first_cleared = w.first_cleared;
  e.new_batch_buffered = buffered;
  return e;
}

void single_stream_events(const FullConfiguration& fc, const ChainState& s, const SystemConfig& cfg,
                          std::vector<ChainEvent>& out) {
  const int n = cfg.n, k = cfg.k;
  const Work base = from_config(fc);
  const bool reservation = cfg.policy == PolicyKind::Reservation;
  if (n - fc.z > 0) {
    Work w = base;
    w.m -= 1;
    if (reservation) {
      // The freed server waits until k servers are idle for the head batch.
      w.z += 1;
      if (!w.waiting.empty() && w.z >= k) {
        w.pop_front();
        w.z -= k;
      }
    } else if (!w.waiting.empty()) {
      if (--w.waiting.front() == 0) w.pop_front();
    } else {
      w.z += 1;
    }
    out.push_back(departure(w, s, cfg, n - fc.z, kAnyServer));
  }
  Work w = base;
  w.m += k;
  int buffered = k;
  if (reservation) {
    if (w.waiting.empty() && w.z >= k)
      w.z -= k, buffered = 0;
    else
      w.waiting.push_back(k);
  } else {
    buffered = w.admit_new_batch(k);
  }
  out.push_back(arrival(w, s, cfg, buffered));
}

}  // namespace

std::vector<ChainEvent> chain_events(const ChainState& s, const SystemConfig& cfg) {
  const FullConfiguration fc = decode_state(s, cfg);
  std::vector<ChainEvent> out;
  const int n = cfg.n, k = cfg.k, t = cfg.t, b = fc.b;
  if (t == 0) {
    single_stream_events(fc, s, cfg, out);
    return out;
  }
  const bool reservation = cfg.policy == PolicyKind::Reservation;
  const Work base = from_config(fc);

  if (!reservation && b > t) {
    // Relaxed mode: every completing server takes the head job of the first batch.
    Work w = base;
    w.m -= 1;
    if (--w.waiting.front() == 0) w.pop_front();
    out.push_back(departure(w, s, cfg, n - fc.z, kAnyServer));
  } else {
    for (int c = 0; c <= b; ++c) {
      const int count = c == 0 ? fc.unlisted_busy(n) : fc.batches[c - 1].in_service;
      if (count <= 0) continue;
      Work w = base;
      w.m -= 1;
      const int target = c + 1;  // next batch this server has not served
      const bool allowed = target <= b && (!reservation || target <= t);
      if (!allowed) {
        w.z += 1;
      } else if (--w.waiting[target - 1] == 0) {
        if (target != 1) throw ChainBuildError("non-head batch emptied at " + describe(s));
        w.pop_front();
        if (reservation && b >= t + 1) {
          // The batch that just moved into position t may use the idle servers.
          int& head = w.waiting[t - 1];
          const int a = std::min(w.z, head);
          head -= a;
          w.z -= a;
          if (head == 0) throw ChainBuildError("flush emptied a batch at " + describe(s));
        }
      }
      out.push_back(departure(w, s, cfg, count, c));
    }
  }

  Work w = base;
  w.m += k;
  int buffered = k;
  if (b < t) {
    buffered = w.admit_new_batch(k);
  } else if (!reservation && b == t) {
    int& head = w.waiting.front();
    const int a = std::min(w.z, head);
    head -= a;
    w.z -= a;
    if (head == 0) {
      w.pop_front();
      buffered = w.admit_new_batch(k);
    } else {
      w.waiting.push_back(k);
    }
  } else {
    w.waiting.push_back(k);
  }
  out.push_back(arrival(w, s, cfg, buffered));
  return out;
}

std::vector<std::pair<ChainState, double>> chain_transitions(const ChainState& s,
                                                             const SystemConfig& cfg) {
  std::map<ChainState, double> acc;
  for (const auto& e : chain_events(s, cfg)) {
    const double rate = e.arrival ? cfg.arrival_rate : e.servers * cfg.service_rate;
    if (rate > 0.0) acc[e.to] += rate;
  }
  return {acc.begin(), acc.end()};
}

std::vector<ChainState> reachable_states(const SystemConfig& cfg, int max_m) {
  const SystemConfig probe = cfg.with_rate(1.0);
  ChainState start;
  start.w.assign(cfg.t, 0);
  std::unordered_set<ChainState, ChainStateHash> seen{start};
  std::deque<ChainState> todo{start};
  while (!todo.empty()) {
    ChainState s = std::move(todo.front());
    todo.pop_front();
    for (auto& e : chain_events(s, probe)) {
      if (e.to.m > max_m || seen.count(e.to)) continue;
      seen.insert(e.to);
      todo.push_back(std::move(e.to));
    }
  }
  std::vector<ChainState> out(seen.begin(), seen.end());
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

constexpr int kProbeLevels = 6;

double scale_of(const SystemConfig& cfg) {
  return std::max({1.0, cfg.arrival_rate, cfg.n * cfg.service_rate});
}

void check_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double tol, const char* what) {
  if ((a - b).cwiseAbs().maxCoeff() > tol)
    throw ChainBuildError(std::string("levels are not shift-invariant: ") + what);
}

}  // namespace

QbdBlocks build_qbd(const SystemConfig& cfg) {
  cfg.validate_allow_idle();
  if (!cfg.is_bounding_policy()) throw ConfigError("QBD blocks exist only for Reservation(t) and MkMn(t)");
  const int k = cfg.k;
  QbdBlocks q;
  q.boundary_top = boundary_top(cfg);
  q.level_width = k;

  const auto reach = reachable_states(cfg, q.boundary_top + kProbeLevels * k);
  std::vector<std::vector<ChainState>> per_level(kProbeLevels + 1);
  for (const auto& s : reach) {
    const int j = level_of(s.m, cfg);
    if (j == 0) {
      q.boundary.push_back(s);
    } else if (j <= kProbeLevels - 2) {
      per_level[j].push_back(shift_levels(s, -(j - 1), cfg));
    }
  }
  for (int j = 3; j <= kProbeLevels - 2; ++j)
    if (per_level[j] != per_level[2])
      throw ChainBuildError("reachable level sets differ between levels 2 and " + std::to_string(j));
  std::vector<ChainState> tmpl = per_level[2];
  tmpl.insert(tmpl.end(), per_level[1].begin(), per_level[1].end());
  std::sort(tmpl.begin(), tmpl.end());
  tmpl.erase(std::unique(tmpl.begin(), tmpl.end()), tmpl.end());
  q.level = std::move(tmpl);

  const int qb = static_cast<int>(q.boundary.size());
  const int ql = static_cast<int>(q.level.size());
  using Eigen::MatrixXd;
  q.B0 = MatrixXd::Zero(ql, qb);
  q.B1 = MatrixXd::Zero(qb, qb);
  q.B2 = MatrixXd::Zero(qb, ql);

  // Row blocks from level `from` (0 = boundary): [down | local | up].
  auto fill_row = [&](int from, int offset, MatrixXd& down, MatrixXd& local, MatrixXd& up) {
    const ChainState s = q.state_at(from, offset);
    double out_rate = 0.0;
    for (const auto& [to, rate] : chain_transitions(s, cfg)) {
      const auto where = q.locate(to);
      if (!where) throw ChainBuildError("transition leaves the enumerated state space at " + describe(to));
      const auto [lvl, off] = *where;
      if (lvl == from) local(offset, off) += rate;
      else if (lvl == from + 1) up(offset, off) += rate;
      else if (lvl == from - 1 && from > 0) down(offset, off) += rate;
      else throw ChainBuildError("transition skips a level from " + describe(s));
      out_rate += rate;
    }
    local(offset, offset) -= out_rate;
  };

  MatrixXd unused(std::max(qb, ql), std::max(qb, ql));
  for (int i = 0; i < qb; ++i) fill_row(0, i, unused, q.B1, q.B2);

  MatrixXd L1 = MatrixXd::Zero(ql, ql), U1 = MatrixXd::Zero(ql, ql);
  for (int i = 0; i < ql; ++i) fill_row(1, i, q.B0, L1, U1);

  std::vector<MatrixXd> D(2, MatrixXd::Zero(ql, ql)), L(2, MatrixXd::Zero(ql, ql)),
      U(2, MatrixXd::Zero(ql, ql));
  for (int r = 0; r < 2; ++r)
    for (int i = 0; i < ql; ++i) fill_row(2 + r, i, D[r], L[r], U[r]);
  q.A0 = D[0];
  q.A1 = L[0];
  q.A2 = U[0];

  const double tol = 1e-12 * scale_of(cfg);
  check_equal(D[1], q.A0, tol, "A0");
  check_equal(L[1], q.A1, tol, "A1");
  check_equal(U[1], q.A2, tol, "A2");
  check_equal(L1, q.A1, tol, "first-level A1");
  check_equal(U1, q.A2, tol, "first-level A2");

  auto check_rows = [&](const Eigen::VectorXd& sums, const char* what) {
    if (sums.size() > 0 && sums.cwiseAbs().maxCoeff() > tol)
      throw ChainBuildError(std::string("generator rows do not sum to zero in ") + what);
  };
  check_rows(q.B1.rowwise().sum() + q.B2.rowwise().sum(), "[B1 B2]");
  check_rows(q.B0.rowwise().sum() + q.A1.rowwise().sum() + q.A2.rowwise().sum(), "[B0 A1 A2]");
  check_rows(q.A0.rowwise().sum() + q.A1.rowwise().sum() + q.A2.rowwise().sum(), "[A0 A1 A2]");
  return q;
}

double single_stream_capacity(const SystemConfig& cfg) {
  if (cfg.t != 0 || !cfg.is_bounding_policy())
    throw ConfigError("single-stream capacity applies to Reservation(0) and MkMn(0)");
  if (cfg.policy == PolicyKind::MkMn) return cfg.n * cfg.service_rate / cfg.k;
  // Saturated, m steps through k consecutive values per batch; in service at
  // those values are n, n-1, ..., n-k+1 jobs.
  double time_per_batch = 0.0;
  for (int j = 0; j < cfg.k; ++j) time_per_batch += 1.0 / ((cfg.n - j) * cfg.service_rate);
  return 1.0 / time_per_batch;
}

std::vector<double> recurrence_stationary(const SystemConfig& cfg, double tail_mass) {
  cfg.validate();
  const double cap = single_stream_capacity(cfg);
  if (cfg.arrival_rate >= cap)
    throw UnstableSystem("arrival rate " + std::to_string(cfg.arrival_rate) +
                         " is at or above the stability limit " + std::to_string(cap));
  const int n = cfg.n, k = cfg.k;
  const double lambda = cfg.arrival_rate, mu = cfg.service_rate;
  auto served = [&](int m) {
    return cfg.policy == PolicyKind::Reservation ? reservation0_service_count(m, cfg) : std::min(m, n);
  };

  std::vector<double> pi{1.0};
  double total = 1.0;
  double prev_block = 0.0, block = 0.0;
  constexpr std::size_t kMaxStates = 50'000'000;
  for (int m = 1;; ++m) {
    // Summed afresh each step: a running window loses all precision once the
    // tail is many orders below the head.
    double window = 0.0;
    for (int j = std::max(0, m - k); j < m; ++j) window += pi[j];
    const double v = lambda / (served(m) * mu) * window;
    pi.push_back(v);
    total += v;
    block += v;
    if (m > n && (m - n) % k == 0) {
      // Level masses decay geometrically; bound the remainder by the latest ratio.
      if (prev_block > 0.0) {
        const double r = block / prev_block;
        if (r < 1.0 && block * r / (1.0 - r) < tail_mass * total && m > n + 4 * k) break;
      }
      prev_block = block;
      block = 0.0;
    }
    if (pi.size() > kMaxStates) throw UnstableSystem("recurrence did not reach the tail bound");
  }
  for (double& v : pi) v /= total;
  return pi;
}

}  // namespace mdsq
