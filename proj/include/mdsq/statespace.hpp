#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mdsq/config.hpp"

namespace mdsq {

/// Compressed Markov state (w_1, ..., w_t, m) of a bounding-policy queue.
///
/// `w[i]` is the number of buffered jobs of the (i+1)-th waiting batch (0 when
/// that batch does not exist) and `m` is the total number of jobs in the
/// system. For t = 0 the vector is empty and the state is just m.
struct ChainState {
  std::vector<int> w;
  int m = 0;

  /// Canonical order: by m, then lexicographically by w.
  friend std::strong_ordering operator<=>(const ChainState& a, const ChainState& b) {
    if (auto c = a.m <=> b.m; c != 0) return c;
    return a.w <=> b.w;
  }
  friend bool operator==(const ChainState&, const ChainState&) = default;
};

struct ChainStateHash {
  std::size_t operator()(const ChainState& s) const noexcept;
};

/// One waiting batch of a decoded configuration: jobs still in the buffer and
/// jobs currently in service. Completed jobs are k - waiting - in_service.
struct WaitingBatch {
  int waiting = 0;
  int in_service = 0;
};

/// System snapshot recovered from a ChainState: m, idle servers z, waiting
/// batches b and the per-batch (w_i, s_i) split. Batches beyond the tracked
/// depth are full (w_i = k, s_i = 0).
struct FullConfiguration {
  int m = 0;
  int z = 0;
  int b = 0;
  int tracked = 0;  ///< q: number of leading batches whose counts come from the w-vector
  std::vector<WaitingBatch> batches;

  /// Busy servers not serving a job of any waiting batch.
  int unlisted_busy(int n) const;
  int buffered_jobs() const;
};

class UnreachableState : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Jobs in service for MDS-Reservation(0) in state m.
int reservation0_service_count(int m, const SystemConfig& cfg);

/// Recovers the full configuration for a bounding policy. Throws
/// UnreachableState when no configuration reachable under the policy maps to s.
FullConfiguration decode_state(const ChainState& s, const SystemConfig& cfg);
std::optional<FullConfiguration> try_decode_state(const ChainState& s, const SystemConfig& cfg);

/// Largest m belonging to the QBD boundary: n-k+tk for Reservation(t), n+tk for MkMn(t).
int boundary_top(const SystemConfig& cfg);

/// 0 for boundary states, j >= 1 for the j-th repeating level.
int level_of(int m, const SystemConfig& cfg);

/// All reachable states with exactly m jobs, in canonical order.
std::vector<ChainState> states_with_jobs(int m, const SystemConfig& cfg);

struct StateSpace {
  int boundary_top = 0;
  std::vector<ChainState> boundary;
  std::vector<std::vector<ChainState>> levels;  ///< levels[0] is the first level
};

/// Boundary plus the first `level_limit` levels, each in canonical order.
StateSpace enumerate_states(const SystemConfig& cfg, int level_limit);

/// Same w-vector, m shifted by `levels` whole levels.
ChainState shift_levels(const ChainState& s, int levels, const SystemConfig& cfg);

}  // namespace mdsq
