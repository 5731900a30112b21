// One PASS/FAIL line per acceptance criterion; exits 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mdsq/chain.hpp"
#include "mdsq/experiment.hpp"
#include "mdsq/metrics.hpp"
#include "mdsq/qbd.hpp"
#include "mdsq/simulator.hpp"

using namespace mdsq;
using Eigen::MatrixXd;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream note;  // measured values
  std::string failures;

  Outcome() { note << std::setprecision(5); }
  void require(bool ok, const std::string& what) {
    if (ok) return;
    pass = false;
    failures += (failures.empty() ? "" : "; ") + what;
  }
};

SystemConfig make(PolicyKind p, int n, int k, int t, double lambda, double mu = 1.0) {
  SystemConfig c;
  c.n = n;
  c.k = k;
  c.t = t;
  c.policy = p;
  c.arrival_rate = lambda;
  c.service_rate = mu;
  return c;
}

SimulationOptions opts(long warmup, long horizon, std::uint64_t seed) {
  SimulationOptions o;
  o.warmup_batches = warmup;
  o.horizon_batches = horizon;
  o.seed = seed;
  return o;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::max(a.size(), b.size());
  double tv = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    tv += std::abs((i < a.size() ? a[i] : 0.0) - (i < b.size() ? b[i] : 0.0));
  return tv / 2;
}

// Occupancy pmf from the QBD, extended until the omitted tail is negligible.
std::vector<double> qbd_pmf(const SystemConfig& c) {
  const auto q = build_qbd(c);
  const auto st = stationary(q);
  std::vector<double> p;
  for (int x = 64;; x *= 2) {
    p = occupancy_pmf(q, st, x);
    double s = 0.0;
    for (double v : p) s += v;
    if (1.0 - s < 1e-14 || x > (1 << 16)) break;
  }
  return p;
}

MatrixXd mat(int r, int c, std::initializer_list<double> v) {
  MatrixXd m(r, c);
  auto it = v.begin();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = *it++;
  return m;
}

// 1. Reservation(1), k = 2.
void closed_form_k2(Outcome& o) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int n = 3; n <= 12; ++n) {
    const double expect = n * n * (n - 1.0) / (2.0 * n * n - 2.0 * n + 1.0);
    worst = std::max(worst, std::abs(max_throughput(make(PolicyKind::Reservation, n, 2, 1, 0.0)) - expect));
  }
  const double secs = seconds_since(t0);
  o.note << "max |err| " << worst << ", " << secs << " s";
  o.require(worst < 1e-6, "error above 1e-6");
  o.require(secs < 1.0, "slower than 1 s");
}

// 2. Reservation(1), k = 3, both closed forms.
void closed_form_k3(Outcome& o) {
  const auto t0 = Clock::now();
  double worst = 0.0, forms = 0.0;
  for (int n = 4; n <= 10; ++n) {
    const double N = n;
    const double den = 3 * std::pow(N, 5) - 12 * std::pow(N, 4) + 22 * std::pow(N, 3) - 29 * N * N + 26 * N - 8;
    const double direct = (1.0 - (4 * N * N * N - 8 * N * N + 2 * N + 4) / den) * N / 3.0;
    const double alt = N * (N - 1) * (N - 2) * (N * N * N - N * N + N - 2) / den;
    const double got = max_throughput(make(PolicyKind::Reservation, n, 3, 1, 0.0));
    worst = std::max({worst, std::abs(got - direct), std::abs(got - alt)});
    forms = std::max(forms, std::abs(direct - alt));
  }
  const double secs = seconds_since(t0);
  o.note << "max |err| " << worst << " (forms differ by " << forms << "), " << secs << " s";
  o.require(worst < 1e-6, "error above 1e-6");
  o.require(secs < 1.0, "slower than 1 s");
}

// 3. MkMn capacity is exactly n mu / k; MDS saturation agrees within 2%.
void mkmn_capacity(Outcome& o) {
  double worst_sat = 0.0;
  for (auto [n, k] : {std::pair{4, 2}, {10, 5}}) {
    const double cap = static_cast<double>(n) / k;
    for (int t = 0; t <= 2; ++t) {
      const double got = max_throughput(make(PolicyKind::MkMn, n, k, t, 0.0));
      o.require(got == cap, "MkMn(" + std::to_string(t) + ") not exact");
    }
    const double sat = measure_saturation_throughput(make(PolicyKind::Mds, n, k, 0, 0.0), 11, 1'000'000);
    worst_sat = std::max(worst_sat, std::abs(sat - cap) / cap);
  }
  o.note << "MkMn exact; MDS saturation max rel err " << worst_sat;
  o.require(worst_sat < 0.02, "MDS saturation off by more than 2%");
}

// 4. QBD against the scalar recurrences.
void oracle_equivalence(Outcome& o) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (auto p : {PolicyKind::Reservation, PolicyKind::MkMn})
    for (auto [n, k, l] : {std::tuple{4, 2, 1.0}, {10, 5, 1.5}}) {
      const auto c = make(p, n, k, 0, l);
      worst = std::max(worst, total_variation(qbd_pmf(c), recurrence_stationary(c)));
    }
  const double secs = seconds_since(t0);
  o.note << "max TV " << worst << ", " << secs << " s";
  o.require(worst < 1e-9, "TV above 1e-9");
  o.require(secs < 1.0, "slower than 1 s");
}

// 5. Hand-derived n=4, k=2 transition matrices at lambda = mu = 1.
void block_fidelity(Outcome& o) {
  const auto r0 = build_qbd(make(PolicyKind::Reservation, 4, 2, 0, 1.0));
  o.require(r0.B0 == mat(2, 3, {0, 0, 3, 0, 0, 0}), "Resv(0) B0");
  o.require(r0.B1 == mat(3, 3, {-1, 0, 1, 1, -2, 0, 0, 2, -3}), "Resv(0) B1");
  o.require(r0.B2 == mat(3, 2, {0, 0, 1, 0, 0, 1}), "Resv(0) B2");
  o.require(r0.A0 == mat(2, 2, {0, 3, 0, 0}), "Resv(0) A0");
  o.require(r0.A1 == mat(2, 2, {-4, 0, 4, -5}), "Resv(0) A1");
  o.require(r0.A2 == mat(2, 2, {1, 0, 0, 1}), "Resv(0) A2");
  const auto m0 = build_qbd(make(PolicyKind::MkMn, 4, 2, 0, 1.0));
  o.require(m0.B0 == mat(2, 5, {0, 0, 0, 0, 4, 0, 0, 0, 0, 0}), "MkMn(0) B0");
  o.require(m0.B1 == mat(5, 5, {-1, 0, 1, 0, 0, 1, -2, 0, 1, 0, 0, 2, -3, 0, 1, 0, 0, 3, -4, 0, 0, 0, 0, 4, -5}),
            "MkMn(0) B1");
  o.require(m0.B2 == mat(5, 2, {0, 0, 0, 0, 0, 0, 1, 0, 0, 1}), "MkMn(0) B2");
  o.require(m0.A0 == mat(2, 2, {0, 4, 0, 0}), "MkMn(0) A0");
  o.require(m0.A1 == mat(2, 2, {-5, 0, 4, -5}), "MkMn(0) A1");
  o.require(m0.A2 == mat(2, 2, {1, 0, 0, 1}), "MkMn(0) A2");
  o.note << "12 matrices compared entrywise";
}

// 6. Analytic occupancy against 10^6-batch simulations.
void chain_vs_simulation(Outcome& o) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (auto [p, t] : {std::pair{PolicyKind::Reservation, 0}, {PolicyKind::Reservation, 1},
                      {PolicyKind::Reservation, 2}, {PolicyKind::MkMn, 0}, {PolicyKind::MkMn, 1}}) {
    const auto c = make(p, 4, 2, t, 1.2);
    const auto sim = simulate(c, opts(10'000, 1'000'000, 600 + t));
    const double tv = total_variation(qbd_pmf(c), sim.occupancy_histogram);
    o.note << policy_label(c) << " " << tv << ", ";
    worst = std::max(worst, tv);
  }
  const double secs = seconds_since(t0);
  o.note << secs << " s";
  o.require(worst < 0.01, "TV above 0.01");
  o.require(secs < 300.0, "slower than 5 min");
}

// 7. Latency ordering with simulated MDS inside the widened envelope.
void latency_sandwich(Outcome& o) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (double l : {0.5, 1.0, 1.5, 1.9}) {
    auto analytic = [&](PolicyKind p, int t) {
      const auto est = analytic_mean_latency(make(p, 10, 5, t, l));
      return est ? est->mean : inf;  // unstable lower bound: unbounded latency
    };
    const double r1 = analytic(PolicyKind::Reservation, 1), r2 = analytic(PolicyKind::Reservation, 2),
                 r3 = analytic(PolicyKind::Reservation, 3), m1 = analytic(PolicyKind::MkMn, 1),
                 m0 = analytic(PolicyKind::MkMn, 0);
    const int reps = l >= 1.9 ? 16 : 4;
    const auto mds = replicate(make(PolicyKind::Mds, 10, 5, 0, l), reps, opts(10'000, 1'000'000, 700));
    const double d = mds.mean_batch_latency, ci = mds.latency_ci;
    o.note << "l=" << l << ": " << r1 << " >= " << r2 << " >= " << r3 << " >= [" << d << " +- " << ci << "] >= " << m1
           << " >= " << m0 << "; ";
    const std::string at = " at lambda " + std::to_string(l);
    o.require(r1 >= r2 && r2 >= r3, "Resv ordering" + at);
    o.require(m1 >= m0, "MkMn ordering" + at);
    o.require(r3 >= m1, "Resv(3) below MkMn(1)" + at);
    o.require(d - ci <= r3 && d + ci >= m1, "MDS outside envelope" + at);
  }
}

// 8. Light traffic.
void light_traffic(Outcome& o) {
  const auto r = simulate(make(PolicyKind::Mds, 10, 5, 0, 0.01), opts(1'000, 200'000, 800));
  const double rel = std::abs(r.mean_batch_latency - 137.0 / 60.0) / (137.0 / 60.0);
  o.note << "mean " << r.mean_batch_latency << " vs 137/60, rel err " << rel;
  o.require(rel < 0.02, "off by more than 2%");
}

// 9. Waiting probability, analytic against the simulated fraction of arrivals that wait.
void waiting_probability_check(Outcome& o) {
  for (auto [p, t] : {std::pair{PolicyKind::MkMn, 0}, {PolicyKind::Reservation, 1}}) {
    const auto c = make(p, 10, 5, t, 1.5);
    const auto q = build_qbd(c);
    const auto st = stationary(q);
    const double exact = waiting_probability(q, st, c);
    const auto sim = simulate(c, opts(10'000, 1'000'000, 900 + t));
    const double diff = std::abs(exact - sim.waiting_fraction);
    o.note << policy_label(c) << " " << exact << " vs " << sim.waiting_fraction << "; ";
    o.require(diff < 0.005, policy_label(c) + " differs by " + std::to_string(diff));
  }
}

// 10. Degraded reads: repair beats reconstruction beyond the pooled CI.
void degraded_reads(Outcome& o) {
  const auto cmp = degraded_read_compare(6, 2, 3, {0.5, 1.0, 1.5, 2.0}, 1.0, 2.0, opts(10'000, 500'000, 1000));
  for (const auto& pt : cmp.points) {
    if (!pt.reconstruction || !pt.repair) {
      o.require(false, "unstable point at " + std::to_string(pt.lambda));
      continue;
    }
    const double a = pt.reconstruction->mean_batch_latency, b = pt.repair->mean_batch_latency;
    const double pooled = std::hypot(pt.reconstruction->latency_ci, pt.repair->latency_ci);
    o.note << "l=" << pt.lambda << ": " << b << " < " << a << " (pooled CI " << pooled << "); ";
    o.require(a - b > pooled, "gap within CI at " + std::to_string(pt.lambda));
  }
}

// 11. MDS(4,2) against MkMn(0) on n - k + 1 = 3 servers.
void mkmn_bound(Outcome& o) {
  for (double l : {0.5, 1.0, 1.4}) {
    const auto mds = simulate(make(PolicyKind::Mds, 4, 2, 0, l), opts(10'000, 1'000'000, 1100));
    const auto up = simulate(make(PolicyKind::MkMn, 3, 2, 0, l), opts(10'000, 1'000'000, 1100));
    const double pooled = std::hypot(mds.latency_ci, up.latency_ci);
    o.note << "l=" << l << ": " << mds.mean_batch_latency << " <= " << up.mean_batch_latency << "; ";
    o.require(mds.mean_batch_latency <= up.mean_batch_latency + pooled, "violated at " + std::to_string(l));
  }
}

// 12. Byte-identical CSV for a repeated simulate experiment.
void determinism(Outcome& o) {
  const auto dir = std::filesystem::temp_directory_path() / "mdsq_acceptance_determinism";
  std::filesystem::remove_all(dir);
  ExperimentSpec s;
  apply_config_text(s, "n = 10\nk = 5\nlambda = 0.5, 1.5\npolicies = mds, resv:2, mkmn:1\n"
                       "metrics = latency, quantile, occupancy, waiting, throughput\n"
                       "warmup = 1000\nhorizon = 20000\nseed = 12\n");
  s.kind = ExperimentKind::Simulate;
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream b;
    b << in.rdbuf();
    return b.str();
  };
  for (const char* run : {"a", "b"}) {
    s.out_dir = dir / run;
    run_experiment(s);
  }
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "a")) {
    ++files;
    o.require(slurp(e.path()) == slurp(dir / "b" / e.path().filename()),
              e.path().filename().string() + " differs");
  }
  o.note << files << " CSV tables compared";
  o.require(files == 5, "expected 5 tables");
  std::filesystem::remove_all(dir);
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    void (*run)(Outcome&);
  };
  const Criterion criteria[] = {
      {"closed-form throughput, k=2", closed_form_k2},
      {"closed-form throughput, k=3", closed_form_k3},
      {"MDS/MkMn capacity", mkmn_capacity},
      {"QBD vs recurrence", oracle_equivalence},
      {"n=4, k=2 block matrices", block_fidelity},
      {"chain vs simulation occupancy", chain_vs_simulation},
      {"latency sandwich", latency_sandwich},
      {"light-traffic limit", light_traffic},
      {"waiting probability", waiting_probability_check},
      {"degraded reads", degraded_reads},
      {"MkMn(0) on n-k+1 servers bounds MDS", mkmn_bound},
      {"determinism", determinism},
  };
  int failed = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    Outcome o;
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::cout << "criterion " << std::setw(2) << index << " " << (o.pass ? "PASS" : "FAIL") << "  " << c.name
              << ": " << o.note.str();
    if (!o.pass) std::cout << " [" << o.failures << "]";
    std::cout << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
