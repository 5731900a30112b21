#include "mdsq/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mdsq/chain.hpp"
#include "mdsq/metrics.hpp"
#include "mdsq/qbd.hpp"
#include "mdsq/simulator.hpp"

namespace mdsq {

namespace {

constexpr double kSupportedQuantiles[] = {0.5, 0.9, 0.99, 0.999};
const std::vector<std::string> kMetrics = {"latency", "quantile", "occupancy", "waiting", "throughput"};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || p != end) throw SpecError("bad value for '" + key + "': '" + text + "'");
  return v;
}

std::string num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string policy_text(const PolicySpec& p) {
  std::string s(policy_name(p.kind));
  if (p.kind != PolicyKind::Mds) s += ":" + std::to_string(p.t);
  return s;
}

bool wants(const ExperimentSpec& spec, const std::string& metric) {
  return std::find(spec.metrics.begin(), spec.metrics.end(), metric) != spec.metrics.end();
}

SystemConfig system_for(const ExperimentSpec& spec, const PolicySpec& p, double lambda) {
  SystemConfig c;
  c.n = spec.n;
  c.k = spec.k;
  c.service_rate = spec.mu;
  c.arrival_rate = lambda;
  c.policy = p.kind;
  c.t = p.kind == PolicyKind::Mds ? 0 : p.t;
  return c;
}

SimulationOptions sim_options(const ExperimentSpec& spec) {
  SimulationOptions o;
  o.seed = spec.seed;
  o.warmup_batches = spec.warmup;
  o.horizon_batches = spec.horizon;
  return o;
}

ResultRow base_row(const std::string& metric, const SystemConfig& c, const char* method) {
  ResultRow r;
  r.metric = metric;
  r.policy = std::string(policy_name(c.policy));
  r.t = c.t;
  r.n = c.n;
  r.k = c.k;
  r.lambda = c.arrival_rate;
  r.mu = c.service_rate;
  r.method = method;
  return r;
}

class Collector {
 public:
  explicit Collector(const ExperimentSpec& spec) : spec_(spec) {}

  void analytic(const PolicySpec& p, double lambda) {
    const SystemConfig c = system_for(spec_, p, lambda);
    const QbdBlocks q = build_qbd(c);
    auto emit_unstable = [&](const std::string& metric) {
      ResultRow r = base_row(metric, c, "analytic");
      r.status = "unstable";
      add(std::move(r));
    };
    if (!drift(q).stable()) {
      if (wants(spec_, "latency")) emit_unstable("latency");
      if (wants(spec_, "occupancy")) emit_unstable("occupancy_ccdf");
      if (wants(spec_, "waiting")) emit_unstable("waiting_probability");
      return;
    }
    const StationaryDistribution st = stationary(q);
    if (wants(spec_, "latency")) {
      const auto est = mean_latency(latency_profile(c, q, st, spec_.tail), q, st);
      ResultRow r = base_row("latency", c, "analytic");
      r.value = est.mean;
      r.omitted_mass = est.tail_mass;
      add(std::move(r));
    }
    if (wants(spec_, "occupancy")) {
      const auto ccdf = occupancy_ccdf(q, st, spec_.x_max);
      for (int x = 0; x <= spec_.x_max; ++x) {
        ResultRow r = base_row("occupancy_ccdf", c, "analytic");
        r.x = std::to_string(x);
        r.value = ccdf[x];
        add(std::move(r));
      }
    }
    if (wants(spec_, "waiting")) {
      ResultRow r = base_row("waiting_probability", c, "analytic");
      r.value = waiting_probability(q, st, c);
      add(std::move(r));
    }
  }

  void simulated(const PolicySpec& p, double lambda, bool analytic_metrics_too) {
    const SystemConfig c = system_for(spec_, p, lambda);
    const SimulationOptions o = sim_options(spec_);
    const MetricsReport rep = spec_.replications >= 2 ? replicate(c, spec_.replications, o) : simulate(c, o);
    const std::string status = rep.saturated ? "saturated" : "ok";
    auto row = [&](const std::string& metric) {
      ResultRow r = base_row(metric, c, "simulated");
      r.seed = spec_.seed;
      r.status = status;
      return r;
    };
    if (analytic_metrics_too && wants(spec_, "latency")) {
      ResultRow r = row("latency");
      r.value = rep.mean_batch_latency;
      r.ci_halfwidth = rep.latency_ci;
      add(std::move(r));
    }
    if (wants(spec_, "quantile")) {
      for (double qv : spec_.quantiles) {
        ResultRow r = row("latency_quantile");
        r.x = num(qv);
        r.value = rep.latency_quantiles.at(qv);
        add(std::move(r));
      }
    }
    if (analytic_metrics_too && wants(spec_, "occupancy")) {
      double cum = 0.0;
      for (int x = 0; x <= spec_.x_max; ++x) {
        if (x < static_cast<int>(rep.occupancy_histogram.size())) cum += rep.occupancy_histogram[x];
        ResultRow r = row("occupancy_ccdf");
        r.x = std::to_string(x);
        r.value = std::max(0.0, 1.0 - cum);
        add(std::move(r));
      }
    }
    if (analytic_metrics_too && wants(spec_, "waiting")) {
      ResultRow r = row("waiting_probability");
      r.value = rep.waiting_fraction;
      r.ci_halfwidth = rep.waiting_ci;
      add(std::move(r));
    }
    if (wants(spec_, "throughput")) {
      ResultRow r = row("throughput");
      r.value = rep.observed_throughput;
      r.ci_halfwidth = rep.throughput_ci;
      add(std::move(r));
    }
  }

  void add(ResultRow r) { tables_[r.metric].push_back(std::move(r)); }
  ResultTables take() { return std::move(tables_); }

 private:
  const ExperimentSpec& spec_;
  ResultTables tables_;
};

void run_policy_grid(const ExperimentSpec& spec, Collector& col) {
  for (const auto& p : spec.policies) {
    const bool bounding = p.kind != PolicyKind::Mds;
    const Method mode = spec.kind == ExperimentKind::Solve      ? Method::Analytic
                        : spec.kind == ExperimentKind::Simulate ? Method::Simulated
                                                                : spec.method;
    const bool analytic = bounding && mode != Method::Simulated;
    const bool simulated = !bounding || mode != Method::Analytic;
    // In auto mode the simulation only supplies what has no analytic form.
    const bool sim_all = simulated && !(analytic && mode == Method::Auto);
    const bool sim_needed = sim_all || wants(spec, "quantile") || wants(spec, "throughput");
    for (double lambda : spec.lambdas) {
      if (analytic) col.analytic(p, lambda);
      if (simulated && sim_needed) col.simulated(p, lambda, sim_all);
    }
  }
}

void run_throughput(const ExperimentSpec& spec, Collector& col) {
  const Method m = spec.method;
  for (const auto& p : spec.policies) {
    SystemConfig c = system_for(spec, p, 0.0);
    const bool bounding = p.kind != PolicyKind::Mds;
    if (bounding && m != Method::Simulated) {
      ResultRow r = base_row("max_throughput", c, "analytic");
      r.value = max_throughput(c);
      col.add(std::move(r));
    }
    if (!bounding || m == Method::Simulated || m == Method::Both) {
      ResultRow r = base_row("max_throughput", c, "simulated");
      r.seed = spec.seed;
      r.value = measure_saturation_throughput(c, spec.seed, spec.horizon);
      col.add(std::move(r));
    }
  }
  if (spec.n_max == 0) return;
  for (const auto& p : spec.policies) {
    if (p.kind != PolicyKind::Reservation || p.t < 1) continue;
    for (const auto& pt : throughput_loss_curve(spec.k, p.t, spec.n_min, spec.n_max, spec.mu)) {
      SystemConfig c = system_for(spec, p, 0.0);
      c.n = pt.n;
      ResultRow r = base_row("throughput_loss", c, "analytic");
      r.x = std::to_string(pt.n);
      r.value = pt.loss;
      col.add(std::move(r));
    }
  }
}

void run_degraded(const ExperimentSpec& spec, Collector& col) {
  const auto cmp = degraded_read_compare(spec.n, spec.k, spec.d, spec.lambdas, spec.mu, spec.repair_speedup,
                                         sim_options(spec), spec.replications);
  auto emit = [&](const char* role, const SystemConfig& base, double lambda,
                  const std::optional<MetricsReport>& rep) {
    ResultRow r = base_row("degraded_latency", base.with_rate(lambda), "simulated");
    r.seed = spec.seed;
    r.x = role;
    if (!rep) {
      r.status = "unstable";
    } else {
      r.value = rep->mean_batch_latency;
      r.ci_halfwidth = rep->latency_ci;
      if (rep->saturated) r.status = "saturated";
    }
    col.add(std::move(r));
  };
  for (const auto& pt : cmp.points) {
    emit("reconstruction", cmp.reconstruction, pt.lambda, pt.reconstruction);
    emit("repair", cmp.repair, pt.lambda, pt.repair);
  }
}

}  // namespace

ExperimentKind parse_kind(const std::string& name) {
  if (name == "solve") return ExperimentKind::Solve;
  if (name == "simulate") return ExperimentKind::Simulate;
  if (name == "throughput") return ExperimentKind::Throughput;
  if (name == "sweep") return ExperimentKind::Sweep;
  if (name == "degraded-reads") return ExperimentKind::DegradedReads;
  throw SpecError("unknown experiment kind '" + name + "'");
}

std::string kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Solve: return "solve";
    case ExperimentKind::Simulate: return "simulate";
    case ExperimentKind::Throughput: return "throughput";
    case ExperimentKind::Sweep: return "sweep";
    case ExperimentKind::DegradedReads: return "degraded-reads";
  }
  return "?";
}

PolicySpec parse_policy_spec(const std::string& text) {
  const auto colon = text.find(':');
  PolicySpec p;
  try {
    p.kind = parse_policy(trim(text.substr(0, colon)));
  } catch (const ConfigError& e) {
    throw SpecError(e.what());
  }
  if (colon == std::string::npos) {
    if (p.kind != PolicyKind::Mds) throw SpecError("policy '" + text + "' needs a depth, e.g. resv:2");
    return p;
  }
  if (p.kind == PolicyKind::Mds) throw SpecError("mds takes no depth");
  p.t = parse_number<int>("policies", trim(text.substr(colon + 1)));
  if (p.t < 0) throw SpecError("policy depth must be >= 0");
  return p;
}

void ExperimentSpec::validate() const {
  if (n < 1 || k < 1 || k > n) throw SpecError("need 1 <= k <= n");
  if (!(mu > 0.0)) throw SpecError("mu must be positive");
  for (const auto& m : metrics)
    if (std::find(kMetrics.begin(), kMetrics.end(), m) == kMetrics.end())
      throw SpecError("unknown metric '" + m + "'");
  for (double q : quantiles)
    if (std::find(std::begin(kSupportedQuantiles), std::end(kSupportedQuantiles), q) ==
        std::end(kSupportedQuantiles))
      throw SpecError("quantile " + num(q) + " not tracked (use 0.5, 0.9, 0.99, 0.999)");
  if (x_max < 0) throw SpecError("x_max must be >= 0");
  if (!(tail > 0.0 && tail < 1.0)) throw SpecError("tail must lie in (0, 1)");
  if (warmup < 0 || horizon <= warmup) throw SpecError("need horizon > warmup >= 0");
  if (replications < 1) throw SpecError("replications must be >= 1");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0)) throw SpecError("lambda values must be positive");
    if (i > 0 && !(lambdas[i] > lambdas[i - 1])) throw SpecError("lambda grid must be strictly increasing");
  }
  for (std::size_t i = 0; i < policies.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (policies[i] == policies[j]) throw SpecError("policy listed twice: " + policy_text(policies[i]));

  switch (kind) {
    case ExperimentKind::Solve:
    case ExperimentKind::Simulate:
    case ExperimentKind::Sweep:
      if (policies.empty()) throw SpecError("no policies given");
      if (lambdas.empty()) throw SpecError("no lambda values given");
      if (metrics.empty()) throw SpecError("no metrics given");
      break;
    case ExperimentKind::Throughput:
      if (policies.empty()) throw SpecError("no policies given");
      if (n_max != 0 && (n_min < 1 || n_max < n_min)) throw SpecError("need 1 <= n_min <= n_max");
      if (n_max != 0 && k < 2) throw SpecError("throughput loss needs k >= 2");
      break;
    case ExperimentKind::DegradedReads:
      if (lambdas.empty()) throw SpecError("no lambda values given");
      if (!(k <= d && d <= n - 1)) throw SpecError("degraded reads need k <= d <= n - 1");
      break;
  }
  if (kind == ExperimentKind::Solve) {
    for (const auto& p : policies)
      if (p.kind == PolicyKind::Mds) throw SpecError("mds has no analytic model; use simulate or sweep");
    for (const auto& m : metrics)
      if (m == "quantile" || m == "throughput") throw SpecError("metric '" + m + "' is simulation-only");
  }
  if (kind == ExperimentKind::Sweep && method == Method::Analytic)
    for (const auto& p : policies)
      if (p.kind == PolicyKind::Mds) throw SpecError("mds has no analytic model");
}

std::vector<std::string> preset_names() { return {"fig1", "fig5", "fig7", "fig8", "fig-waitprob", "fig10"}; }

ExperimentSpec preset(const std::string& name) {
  ExperimentSpec s;
  const std::vector<PolicySpec> bounds = {{PolicyKind::Reservation, 1}, {PolicyKind::Reservation, 2},
                                          {PolicyKind::Reservation, 3}, {PolicyKind::MkMn, 0},
                                          {PolicyKind::MkMn, 1},        {PolicyKind::Mds, 0}};
  std::vector<double> grid;
  for (int i = 1; i <= 19; ++i) grid.push_back(i / 10.0);
  grid.push_back(1.95);
  if (name == "fig1") {
    s.kind = ExperimentKind::Sweep;
    s.policies = bounds;
    s.lambdas = grid;
    s.metrics = {"latency"};
  } else if (name == "fig5") {
    s.kind = ExperimentKind::Throughput;
    s.k = 2;
    s.n = 4;
    s.policies = {{PolicyKind::Reservation, 1}, {PolicyKind::Reservation, 2}};
    s.n_min = 2;
    s.n_max = 20;
  } else if (name == "fig7") {
    s.kind = ExperimentKind::Simulate;
    s.policies = bounds;
    s.lambdas = grid;
    s.metrics = {"quantile"};
    s.quantiles = {0.99};
  } else if (name == "fig8") {
    s.kind = ExperimentKind::Sweep;
    s.policies = bounds;
    s.lambdas = {1.5};
    s.metrics = {"occupancy"};
  } else if (name == "fig-waitprob") {
    s.kind = ExperimentKind::Sweep;
    s.policies = bounds;
    s.lambdas = grid;
    s.metrics = {"waiting"};
  } else if (name == "fig10") {
    s.kind = ExperimentKind::DegradedReads;
    s.n = 6;
    s.k = 2;
    s.d = 3;
    s.lambdas = {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25};
  } else {
    throw SpecError("unknown preset '" + name + "'");
  }
  return s;
}

void apply_config_text(ExperimentSpec& s, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SpecError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    auto doubles = [&]() {
      std::vector<double> v;
      for (const auto& item : split_list(val)) v.push_back(parse_number<double>(key, item));
      return v;
    };
    if (key == "preset") {
      s = preset(val);
    } else if (key == "kind") {
      s.kind = parse_kind(val);
    } else if (key == "n") {
      s.n = parse_number<int>(key, val);
    } else if (key == "k") {
      s.k = parse_number<int>(key, val);
    } else if (key == "mu") {
      s.mu = parse_number<double>(key, val);
    } else if (key == "lambda") {
      s.lambdas = doubles();
    } else if (key == "policies") {
      s.policies.clear();
      for (const auto& item : split_list(val)) s.policies.push_back(parse_policy_spec(item));
    } else if (key == "metrics") {
      s.metrics = split_list(val);
    } else if (key == "method") {
      if (val == "auto") s.method = Method::Auto;
      else if (val == "analytic") s.method = Method::Analytic;
      else if (val == "simulated") s.method = Method::Simulated;
      else if (val == "both") s.method = Method::Both;
      else throw SpecError("bad method '" + val + "'");
    } else if (key == "quantiles") {
      s.quantiles = doubles();
    } else if (key == "x_max") {
      s.x_max = parse_number<int>(key, val);
    } else if (key == "tail") {
      s.tail = parse_number<double>(key, val);
    } else if (key == "seed") {
      s.seed = parse_number<std::uint64_t>(key, val);
    } else if (key == "warmup") {
      s.warmup = parse_number<long>(key, val);
    } else if (key == "horizon") {
      s.horizon = parse_number<long>(key, val);
    } else if (key == "replications") {
      s.replications = parse_number<int>(key, val);
    } else if (key == "n_min") {
      s.n_min = parse_number<int>(key, val);
    } else if (key == "n_max") {
      s.n_max = parse_number<int>(key, val);
    } else if (key == "d") {
      s.d = parse_number<int>(key, val);
    } else if (key == "repair_speedup") {
      s.repair_speedup = parse_number<double>(key, val);
    } else if (key == "out") {
      s.out_dir = val;
    } else if (key == "format") {
      if (val == "csv") s.format = OutputFormat::Csv;
      else if (val == "json") s.format = OutputFormat::Json;
      else throw SpecError("format must be csv or json");
    } else {
      throw SpecError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
}

void apply_config_file(ExperimentSpec& spec, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_text(spec, buf.str());
}

ResultTables compute_experiment(const ExperimentSpec& spec) {
  spec.validate();
  Collector col(spec);
  switch (spec.kind) {
    case ExperimentKind::Solve:
    case ExperimentKind::Simulate:
    case ExperimentKind::Sweep: run_policy_grid(spec, col); break;
    case ExperimentKind::Throughput: run_throughput(spec, col); break;
    case ExperimentKind::DegradedReads: run_degraded(spec, col); break;
  }
  return col.take();
}

std::string format_csv(const std::vector<ResultRow>& rows) {
  std::string out = "metric,policy,t,n,k,lambda,mu,seed,method,x,value,ci_halfwidth,omitted_mass,status\n";
  auto opt = [](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
  for (const auto& r : rows) {
    out += r.metric + ',' + r.policy + ',' + std::to_string(r.t) + ',' + std::to_string(r.n) + ',' +
           std::to_string(r.k) + ',' + num(r.lambda) + ',' + num(r.mu) + ',' +
           (r.seed ? std::to_string(*r.seed) : std::string()) + ',' + r.method + ',' + r.x + ',' + opt(r.value) +
           ',' + opt(r.ci_halfwidth) + ',' + opt(r.omitted_mass) + ',' + r.status + '\n';
  }
  return out;
}

std::string format_json(const std::vector<ResultRow>& rows) {
  using nlohmann::ordered_json;
  ordered_json arr = ordered_json::array();
  auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  for (const auto& r : rows) {
    ordered_json o;
    o["metric"] = r.metric;
    o["policy"] = r.policy;
    o["t"] = r.t;
    o["n"] = r.n;
    o["k"] = r.k;
    o["lambda"] = r.lambda;
    o["mu"] = r.mu;
    o["seed"] = r.seed ? ordered_json(*r.seed) : ordered_json(nullptr);
    o["method"] = r.method;
    o["x"] = r.x.empty() ? ordered_json(nullptr) : ordered_json(r.x);
    o["value"] = opt(r.value);
    o["ci_halfwidth"] = opt(r.ci_halfwidth);
    o["omitted_mass"] = opt(r.omitted_mass);
    o["status"] = r.status;
    arr.push_back(std::move(o));
  }
  return arr.dump(2) + "\n";
}

std::vector<std::filesystem::path> write_tables(const ResultTables& tables, const ExperimentSpec& spec) {
  std::filesystem::create_directories(spec.out_dir);
  std::vector<std::filesystem::path> paths;
  const bool csv = spec.format == OutputFormat::Csv;
  for (const auto& [metric, rows] : tables) {
    const auto path = spec.out_dir / (metric + (csv ? ".csv" : ".json"));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << (csv ? format_csv(rows) : format_json(rows));
    paths.push_back(path);
  }
  return paths;
}

int run_experiment(const ExperimentSpec& spec) {
  write_tables(compute_experiment(spec), spec);
  return 0;
}

}  // namespace mdsq
