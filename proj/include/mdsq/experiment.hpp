#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdsq/config.hpp"

namespace mdsq {

/// Invalid experiment description; the CLI maps it to exit status 2.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ExperimentKind { Solve, Simulate, Throughput, Sweep, DegradedReads };
enum class OutputFormat { Csv, Json };

/// auto: analytic where a bounding-policy chain exists, simulation otherwise.
enum class Method { Auto, Analytic, Simulated, Both };

struct PolicySpec {
  PolicyKind kind = PolicyKind::Mds;
  int t = 0;
  friend bool operator==(const PolicySpec&, const PolicySpec&) = default;
};

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Sweep;
  int n = 10;
  int k = 5;
  double mu = 1.0;
  std::vector<PolicySpec> policies;
  std::vector<double> lambdas;
  /// latency, quantile, occupancy, waiting, throughput
  std::vector<std::string> metrics{"latency"};
  Method method = Method::Auto;
  std::vector<double> quantiles{0.5, 0.9, 0.99, 0.999};
  int x_max = 60;  ///< occupancy tables cover x = 0..x_max
  double tail = 1e-8;
  std::uint64_t seed = 1;
  long warmup = 10'000;
  long horizon = 1'000'000;
  int replications = 1;
  int n_min = 0;  ///< throughput-loss range; n_max = 0 disables the table
  int n_max = 0;
  int d = 0;                    ///< degraded reads: helper count
  double repair_speedup = 0.0;  ///< <= 0: d - k + 1
  std::filesystem::path out_dir = ".";
  OutputFormat format = OutputFormat::Csv;

  /// Throws SpecError on any inconsistency.
  void validate() const;
};

ExperimentKind parse_kind(const std::string& name);
std::string kind_name(ExperimentKind kind);

/// "mds", "resv:2", "mkmn:0".
PolicySpec parse_policy_spec(const std::string& text);

/// Named parameter sets: fig1, fig5, fig7, fig8, fig-waitprob, fig10.
ExperimentSpec preset(const std::string& name);
std::vector<std::string> preset_names();

/// Applies `key = value` lines on top of `spec`. '#' starts a comment; lists
/// are comma-separated. Unknown keys and malformed values throw SpecError.
void apply_config_text(ExperimentSpec& spec, const std::string& text);
void apply_config_file(ExperimentSpec& spec, const std::filesystem::path& path);

/// One output row. Empty optionals are written as empty CSV fields / JSON null.
struct ResultRow {
  std::string metric;
  std::string policy;
  int t = 0;
  int n = 0;
  int k = 0;
  double lambda = 0.0;
  double mu = 0.0;
  std::optional<std::uint64_t> seed;
  std::string method;  ///< analytic | simulated
  std::string x;
  std::optional<double> value;
  std::optional<double> ci_halfwidth;
  std::optional<double> omitted_mass;
  std::string status = "ok";  ///< ok | unstable | saturated
};

/// Tables keyed by metric name, rows in generation order.
using ResultTables = std::map<std::string, std::vector<ResultRow>>;

ResultTables compute_experiment(const ExperimentSpec& spec);

/// Writes <out_dir>/<metric>.csv or .json for every table; returns the paths.
std::vector<std::filesystem::path> write_tables(const ResultTables& tables, const ExperimentSpec& spec);

std::string format_csv(const std::vector<ResultRow>& rows);
std::string format_json(const std::vector<ResultRow>& rows);

/// Validates, computes and writes. Returns 0; SpecError / ConfigError propagate.
int run_experiment(const ExperimentSpec& spec);

}  // namespace mdsq
