#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mdsq {

/// Scheduling policy family. `Reservation` and `MkMn` are indexed by the
/// depth parameter carried in SystemConfig::t; `Mds` ignores it.
enum class PolicyKind { Mds, Reservation, MkMn };

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parameters of an MDS(n,k) queue together with the scheduling policy run on it.
struct SystemConfig {
  int n = 1;                  ///< servers
  int k = 1;                  ///< jobs per batch
  double arrival_rate = 0.0;  ///< batches per unit time
  double service_rate = 1.0;  ///< jobs per unit time per server
  PolicyKind policy = PolicyKind::Mds;
  int t = 0;

  /// Throws ConfigError when 1 <= k <= n, lambda > 0, mu > 0, t >= 0 is violated.
  void validate() const;

  /// Same as validate() but accepts arrival_rate == 0 (used for drift probes
  /// and light-traffic limits).
  void validate_allow_idle() const;

  bool is_bounding_policy() const { return policy != PolicyKind::Mds; }

  SystemConfig with_rate(double lambda) const {
    SystemConfig c = *this;
    c.arrival_rate = lambda;
    return c;
  }
};

std::string_view policy_name(PolicyKind kind);
PolicyKind parse_policy(std::string_view name);

/// "MDS", "Resv(2)", "MkMn(1)".
std::string policy_label(const SystemConfig& cfg);

/// H_k = 1 + 1/2 + ... + 1/k.
double harmonic(int k);

}  // namespace mdsq
