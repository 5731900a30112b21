#include "mdsq/statespace.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace mdsq {

namespace {

// Nonnegative residue in [0, k).
int mod_k(int a, int k) {
  int r = a % k;
  return r < 0 ? r + k : r;
}

int ceil_div(int a, int k) {
  // k > 0
  return a >= 0 ? (a + k - 1) / k : -((-a) / k);
}

void require_bounding(const SystemConfig& cfg) {
  if (!cfg.is_bounding_policy())
    throw ConfigError("compressed chain states exist only for Reservation(t) and MkMn(t)");
}

// MkMn(0) keeps every job in a single FCFS stream: the first waiting batch may
// be partially started, all later ones are full, and servers idle only when
// the buffer is empty.
std::optional<FullConfiguration> decode_mkmn0(const ChainState& s, const SystemConfig& cfg) {
  if (!s.w.empty() || s.m < 0) return std::nullopt;
  FullConfiguration fc;
  fc.m = s.m;
  if (s.m <= cfg.n) {
    fc.z = cfg.n - s.m;
    return fc;
  }
  const int buffered = s.m - cfg.n;
  fc.z = 0;
  fc.b = ceil_div(buffered, cfg.k);
  fc.batches.assign(fc.b, WaitingBatch{cfg.k, 0});
  fc.batches.front().waiting = mod_k(buffered - 1, cfg.k) + 1;
  return fc;
}

}  // namespace

std::size_t ChainStateHash::operator()(const ChainState& s) const noexcept {
  std::size_t h = static_cast<std::size_t>(s.m) * 0x9E3779B97F4A7C15ull;
  for (int v : s.w) h = (h ^ static_cast<std::size_t>(v + 1)) * 0x100000001B3ull;
  return h;
}

int FullConfiguration::unlisted_busy(int n) const {
  int listed = 0;
  for (const auto& bt : batches) listed += bt.in_service;
  return n - z - listed;
}

int FullConfiguration::buffered_jobs() const {
  int total = 0;
  for (const auto& bt : batches) total += bt.waiting;
  return total;
}

int reservation0_service_count(int m, const SystemConfig& cfg) {
  if (m <= cfg.n) return m;
  return cfg.n - mod_k(cfg.n - m, cfg.k);
}

std::optional<FullConfiguration> try_decode_state(const ChainState& s, const SystemConfig& cfg) {
  require_bounding(cfg);
  const int n = cfg.n, k = cfg.k, t = cfg.t;
  if (static_cast<int>(s.w.size()) != t || s.m < 0) return std::nullopt;
  if (cfg.policy == PolicyKind::MkMn && t == 0) return decode_mkmn0(s, cfg);

  // q: index of the last nonzero entry of a zero-suffixed, non-decreasing prefix.
  int q = 0;
  for (int i = 0; i < t; ++i) {
    const int wi = s.w[i];
    if (wi < 0 || wi > k) return std::nullopt;
    if (wi == 0) {
      for (int j = i + 1; j < t; ++j)
        if (s.w[j] != 0) return std::nullopt;
      break;
    }
    if (i > 0 && wi < s.w[i - 1]) return std::nullopt;
    q = i + 1;
  }

  const int tracked_sum = std::accumulate(s.w.begin(), s.w.end(), 0);
  const int rest = s.m - tracked_sum;  // jobs in service plus jobs of untracked batches
  if (rest < 0) return std::nullopt;
  const int untracked = std::max(0, ceil_div(rest - n, k));
  const int z = n + untracked * k - rest;
  if (z < 0 || z > n) return std::nullopt;
  if (q < t && untracked > 0) return std::nullopt;
  if (t > 0 && q == 0 && rest > n) return std::nullopt;

  FullConfiguration fc;
  fc.m = s.m;
  fc.z = z;
  fc.tracked = q;
  fc.b = (q < t) ? q : t + untracked;
  if (fc.b > 0 && z >= k) return std::nullopt;  // first waiting batch would be served
  if (cfg.policy == PolicyKind::MkMn && untracked > 0 && z != 0) return std::nullopt;

  fc.batches.reserve(fc.b);
  for (int i = 0; i < q; ++i) {
    const int wi = s.w[i];
    const int si = (i + 1 < q) ? s.w[i + 1] - wi : k - z - wi;
    if (si < 0 || si > k - wi) return std::nullopt;
    fc.batches.push_back({wi, si});
  }
  for (int i = q; i < fc.b; ++i) fc.batches.push_back({k, 0});

  if (fc.unlisted_busy(n) < 0) return std::nullopt;
  return fc;
}

FullConfiguration decode_state(const ChainState& s, const SystemConfig& cfg) {
  if (auto fc = try_decode_state(s, cfg)) return *fc;
  std::string w;
  for (int v : s.w) w += std::to_string(v) + ",";
  throw UnreachableState("unreachable state (w=[" + w + "], m=" + std::to_string(s.m) + ") for " +
                         policy_label(cfg));
}

int boundary_top(const SystemConfig& cfg) {
  require_bounding(cfg);
  if (cfg.policy == PolicyKind::Reservation) return cfg.n - cfg.k + cfg.t * cfg.k;
  return cfg.n + cfg.t * cfg.k;
}

int level_of(int m, const SystemConfig& cfg) {
  const int top = boundary_top(cfg);
  if (m <= top) return 0;
  return (m - top - 1) / cfg.k + 1;
}

std::vector<ChainState> states_with_jobs(int m, const SystemConfig& cfg) {
  require_bounding(cfg);
  std::vector<ChainState> out;
  ChainState s;
  s.m = m;
  s.w.assign(cfg.t, 0);
  // Enumerate zero-suffixed, non-decreasing prefixes in lexicographic order.
  auto rec = [&](auto&& self, int pos) -> void {
    if (try_decode_state(s, cfg)) out.push_back(s);
    if (pos == cfg.t) return;
    const int lo = pos == 0 ? 1 : s.w[pos - 1];
    for (int v = lo; v <= cfg.k; ++v) {
      s.w[pos] = v;
      self(self, pos + 1);
    }
    s.w[pos] = 0;
  };
  rec(rec, 0);
  std::sort(out.begin(), out.end());
  return out;
}

StateSpace enumerate_states(const SystemConfig& cfg, int level_limit) {
  require_bounding(cfg);
  if (level_limit < 1) throw ConfigError("level_limit must be >= 1");
  StateSpace sp;
  sp.boundary_top = boundary_top(cfg);
  for (int m = 0; m <= sp.boundary_top; ++m) {
    auto v = states_with_jobs(m, cfg);
    sp.boundary.insert(sp.boundary.end(), v.begin(), v.end());
  }
  for (int j = 1; j <= level_limit; ++j) {
    std::vector<ChainState> level;
    const int lo = sp.boundary_top + (j - 1) * cfg.k + 1;
    for (int m = lo; m < lo + cfg.k; ++m) {
      auto v = states_with_jobs(m, cfg);
      level.insert(level.end(), v.begin(), v.end());
    }
    sp.levels.push_back(std::move(level));
  }
  return sp;
}

ChainState shift_levels(const ChainState& s, int levels, const SystemConfig& cfg) {
  ChainState out = s;
  out.m += levels * cfg.k;
  return out;
}

}  // namespace mdsq
