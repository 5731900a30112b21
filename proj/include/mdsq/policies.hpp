#pragma once

#include <cstdint>
#include <deque>
#include <stdexcept>
#include <vector>

#include "mdsq/config.hpp"
#include "mdsq/statespace.hpp"

namespace mdsq {

class PolicyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct ServerSlot {
  bool busy = false;
  std::uint64_t batch = 0;
  int job = 0;
};

/// A batch with at least one job still in the buffer. `served[s]` is set once
/// server s has been given a job of this batch.
struct BufferedBatch {
  std::uint64_t id = 0;
  int buffered = 0;
  int next_job = 0;  ///< jobs are handed out in index order
  std::vector<char> served;
};

struct Assignment {
  int server = 0;
  std::uint64_t batch = 0;
  int job = 0;
};

/// Detailed system state: who serves what, and the buffer in arrival order.
struct SimState {
  std::vector<ServerSlot> servers;
  std::deque<BufferedBatch> buffer;
  double clock = 0.0;
  std::uint64_t next_batch_id = 0;
  /// Assignments that gave a server a second job of the same batch.
  std::uint64_t distinct_violations = 0;

  SimState() = default;
  explicit SimState(int n) : servers(n) {}

  int idle_count() const;
  int buffered_jobs() const;
  int jobs_in_system() const;
  const BufferedBatch* find_buffered(std::uint64_t id) const;
};

struct ArrivalOutcome {
  std::uint64_t batch = 0;
  int left_buffered = 0;  ///< jobs of the new batch that could not start
};

/// In-place handlers; newly started jobs are appended to `started` when given.
/// Ties go to the lowest server index and the lowest job index.
ArrivalOutcome apply_arrival(SimState& s, const SystemConfig& cfg,
                             std::vector<Assignment>* started = nullptr);
/// Completes the job on `server` and reassigns per policy. Throws PolicyError
/// when the server is idle.
void apply_departure(SimState& s, int server, const SystemConfig& cfg,
                     std::vector<Assignment>* started = nullptr);

SimState on_arrival(SimState s, const SystemConfig& cfg);
SimState on_departure(SimState s, int server, const SystemConfig& cfg);

/// Compressed chain state of a detailed state: buffered counts of the first t
/// waiting batches and the number of jobs in the system.
ChainState compress(const SimState& s, const SystemConfig& cfg);

}  // namespace mdsq
