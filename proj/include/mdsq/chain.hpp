#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "mdsq/qbd_blocks.hpp"
#include "mdsq/statespace.hpp"

namespace mdsq {

class ChainBuildError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class UnstableSystem : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Marks a departure event that any busy server can trigger.
inline constexpr int kAnyServer = -1;

/// One outgoing event of the compressed chain.
///
/// Departures are grouped by the eligibility class of the completing server:
/// class 0 holds busy servers that have served none of the waiting batches,
/// class i >= 1 holds busy servers whose latest job belongs to the i-th waiting
/// batch (they have served batches 1..i). The total rate of a departure event
/// is servers * mu; an arrival event has rate lambda and servers == 0.
struct ChainEvent {
  bool arrival = false;
  int servers = 0;
  int server_class = kAnyServer;
  ChainState to;
  bool first_cleared = false;   ///< the first waiting batch had its last job started
  int new_batch_buffered = 0;   ///< arrivals: jobs of the new batch left in the buffer
};

std::vector<ChainEvent> chain_events(const ChainState& s, const SystemConfig& cfg);

/// Outgoing transitions with rates accumulated per target state.
std::vector<std::pair<ChainState, double>> chain_transitions(const ChainState& s,
                                                             const SystemConfig& cfg);

/// States reachable from the empty system with at most max_m jobs, sorted.
std::vector<ChainState> reachable_states(const SystemConfig& cfg, int max_m);

/// QBD blocks of the compressed chain (boundary up to boundary_top(cfg), levels
/// of width k). Throws ChainBuildError when a row sum is nonzero, a transition
/// skips a level or the interior levels are not shift-invariant.
QbdBlocks build_qbd(const SystemConfig& cfg);

/// Largest stable arrival rate of Reservation(0) / MkMn(0): k departures drain
/// one batch, visiting every residue of m modulo k once.
double single_stream_capacity(const SystemConfig& cfg);

/// Stationary distribution over m for Reservation(0) or MkMn(0) from the cut
/// equations between m-1 and m. Truncated once a geometric bound on the
/// remaining mass drops below tail_mass; normalized to sum 1.
std::vector<double> recurrence_stationary(const SystemConfig& cfg, double tail_mass = 1e-13);

}  // namespace mdsq
