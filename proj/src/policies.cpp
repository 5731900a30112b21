#include "mdsq/policies.hpp"

#include <string>

namespace mdsq {

int SimState::idle_count() const {
  int z = 0;
  for (const auto& sv : servers) z += !sv.busy;
  return z;
}

int SimState::buffered_jobs() const {
  int total = 0;
  for (const auto& bt : buffer) total += bt.buffered;
  return total;
}

int SimState::jobs_in_system() const {
  return static_cast<int>(servers.size()) - idle_count() + buffered_jobs();
}

const BufferedBatch* SimState::find_buffered(std::uint64_t id) const {
  for (const auto& bt : buffer)
    if (bt.id == id) return &bt;
  return nullptr;
}

namespace {

// Gives `server` the next job of the batch at buffer position `pos`; drops the
// batch from the buffer once its last job has started.
void assign(SimState& s, std::size_t pos, int server, std::vector<Assignment>* started) {
  BufferedBatch& bt = s.buffer[pos];
  if (bt.served[server]) ++s.distinct_violations;
  bt.served[server] = 1;
  ServerSlot& slot = s.servers[server];
  slot.busy = true;
  slot.batch = bt.id;
  slot.job = bt.next_job++;
  if (started) started->push_back({server, bt.id, slot.job});
  if (--bt.buffered == 0) s.buffer.erase(s.buffer.begin() + pos);
}

std::size_t position_of(const SimState& s, std::uint64_t id) {
  for (std::size_t i = 0; i < s.buffer.size(); ++i)
    if (s.buffer[i].id == id) return i;
  return s.buffer.size();
}

// Idle servers, lowest index first, take jobs of batch `id` while it has any.
void feed_idle(SimState& s, std::uint64_t id, std::vector<Assignment>* started) {
  for (int sv = 0; sv < static_cast<int>(s.servers.size()); ++sv) {
    if (s.servers[sv].busy) continue;
    const std::size_t pos = position_of(s, id);
    if (pos == s.buffer.size()) return;
    assign(s, pos, sv, started);
  }
}

// Earliest batch among the first `limit` positions that `server` has not served.
std::size_t first_unserved(const SimState& s, int server, std::size_t limit) {
  const std::size_t end = std::min(limit, s.buffer.size());
  for (std::size_t i = 0; i < end; ++i)
    if (!s.buffer[i].served[server]) return i;
  return s.buffer.size();
}

std::uint64_t push_new_batch(SimState& s, const SystemConfig& cfg) {
  BufferedBatch bt;
  bt.id = s.next_batch_id++;
  bt.buffered = cfg.k;
  bt.served.assign(cfg.n, 0);
  s.buffer.push_back(std::move(bt));
  return s.buffer.back().id;
}

// Reservation(0): the head batch starts only as a whole, on k idle servers.
void start_head_batches(SimState& s, const SystemConfig& cfg, std::vector<Assignment>* started) {
  while (!s.buffer.empty() && s.idle_count() >= cfg.k) feed_idle(s, s.buffer.front().id, started);
}

}  // namespace

ArrivalOutcome apply_arrival(SimState& s, const SystemConfig& cfg, std::vector<Assignment>* started) {
  const std::size_t b = s.buffer.size();
  const auto t = static_cast<std::size_t>(cfg.t);
  std::uint64_t id = 0;
  switch (cfg.policy) {
    case PolicyKind::Mds:
      id = push_new_batch(s, cfg);
      feed_idle(s, id, started);
      break;
    case PolicyKind::Reservation:
      if (cfg.t == 0) {
        const bool start = b == 0 && s.idle_count() >= cfg.k;
        id = push_new_batch(s, cfg);
        if (start) feed_idle(s, id, started);
      } else {
        id = push_new_batch(s, cfg);
        if (b < t) feed_idle(s, id, started);
      }
      break;
    case PolicyKind::MkMn:
      if (b < t) {
        id = push_new_batch(s, cfg);
        feed_idle(s, id, started);
      } else if (b == t) {
        // With t = 0 there is no first batch; it counts as cleared.
        bool cleared = true;
        if (b > 0) {
          const std::uint64_t head = s.buffer.front().id;
          feed_idle(s, head, started);
          cleared = position_of(s, head) == s.buffer.size();
        }
        id = push_new_batch(s, cfg);
        if (cleared) feed_idle(s, id, started);
      } else {
        id = push_new_batch(s, cfg);
      }
      break;
  }
  const BufferedBatch* left = s.find_buffered(id);
  return {id, left ? left->buffered : 0};
}

void apply_departure(SimState& s, int server, const SystemConfig& cfg, std::vector<Assignment>* started) {
  if (server < 0 || server >= static_cast<int>(s.servers.size()) || !s.servers[server].busy)
    throw PolicyError("departure from idle server " + std::to_string(server));
  s.servers[server] = ServerSlot{};
  const auto t = static_cast<std::size_t>(cfg.t);
  switch (cfg.policy) {
    case PolicyKind::Mds: {
      const std::size_t pos = first_unserved(s, server, s.buffer.size());
      if (pos < s.buffer.size()) assign(s, pos, server, started);
      break;
    }
    case PolicyKind::Reservation: {
      if (cfg.t == 0) {
        start_head_batches(s, cfg, started);
        break;
      }
      const std::size_t pos = first_unserved(s, server, t);
      if (pos == s.buffer.size()) break;
      const bool head_had_one = pos == 0 && s.buffer.front().buffered == 1;
      const bool has_next = s.buffer.size() > t;
      const std::uint64_t next_id = has_next ? s.buffer[t].id : 0;
      assign(s, pos, server, started);
      if (head_had_one && has_next) feed_idle(s, next_id, started);
      break;
    }
    case PolicyKind::MkMn: {
      if (s.buffer.size() > t) {
        assign(s, 0, server, started);
      } else {
        const std::size_t pos = first_unserved(s, server, s.buffer.size());
        if (pos < s.buffer.size()) assign(s, pos, server, started);
      }
      break;
    }
  }
}

ChainState compress(const SimState& s, const SystemConfig& cfg) {
  ChainState c;
  c.m = s.jobs_in_system();
  c.w.assign(cfg.t, 0);
  for (int i = 0; i < cfg.t && i < static_cast<int>(s.buffer.size()); ++i) c.w[i] = s.buffer[i].buffered;
  return c;
}

SimState on_arrival(SimState s, const SystemConfig& cfg) {
  apply_arrival(s, cfg);
  return s;
}

SimState on_departure(SimState s, int server, const SystemConfig& cfg) {
  apply_departure(s, server, cfg);
  return s;
}

}  // namespace mdsq
