#include "mdsq/config.hpp"

#include <cmath>
#include <string>

namespace mdsq {

namespace {

void check_common(const SystemConfig& c) {
  if (c.n < 1) throw ConfigError("n must be >= 1");
  if (c.k < 1 || c.k > c.n) throw ConfigError("k must satisfy 1 <= k <= n");
  if (!(c.service_rate > 0.0) || !std::isfinite(c.service_rate))
    throw ConfigError("service rate must be positive");
  if (c.t < 0) throw ConfigError("t must be >= 0");
  if (!std::isfinite(c.arrival_rate)) throw ConfigError("arrival rate must be finite");
}

}  // namespace

void SystemConfig::validate() const {
  check_common(*this);
  if (!(arrival_rate > 0.0)) throw ConfigError("arrival rate must be positive");
}

void SystemConfig::validate_allow_idle() const {
  check_common(*this);
  if (arrival_rate < 0.0) throw ConfigError("arrival rate must be non-negative");
}

std::string_view policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Mds: return "mds";
    case PolicyKind::Reservation: return "resv";
    case PolicyKind::MkMn: return "mkmn";
  }
  return "?";
}

PolicyKind parse_policy(std::string_view name) {
  if (name == "mds" || name == "MDS") return PolicyKind::Mds;
  if (name == "resv" || name == "reservation" || name == "Resv") return PolicyKind::Reservation;
  if (name == "mkmn" || name == "MkMn") return PolicyKind::MkMn;
  throw ConfigError("unknown policy '" + std::string(name) + "'");
}

std::string policy_label(const SystemConfig& cfg) {
  switch (cfg.policy) {
    case PolicyKind::Mds: return "MDS";
    case PolicyKind::Reservation: return "Resv(" + std::to_string(cfg.t) + ")";
    case PolicyKind::MkMn: return "MkMn(" + std::to_string(cfg.t) + ")";
  }
  return "?";
}

double harmonic(int k) {
  double h = 0.0;
  for (int j = 1; j <= k; ++j) h += 1.0 / j;
  return h;
}

}  // namespace mdsq
