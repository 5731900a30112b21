#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mdsq/experiment.hpp"

using namespace mdsq;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentSpec small_sweep() {
  ExperimentSpec s;
  apply_config_text(s, R"(
    # comment line
    n = 4
    k = 2
    lambda = 0.5, 1.0, 1.95   # trailing comment
    policies = resv:1, mkmn:0, mds
    metrics = latency, waiting
    warmup = 500
    horizon = 5000
    seed = 17
  )");
  return s;
}

}  // namespace

TEST_CASE("config text parses into a spec") {
  auto s = small_sweep();
  CHECK(s.n == 4);
  CHECK(s.k == 2);
  CHECK(s.lambdas == std::vector<double>{0.5, 1.0, 1.95});
  REQUIRE(s.policies.size() == 3);
  CHECK(s.policies[0] == PolicySpec{PolicyKind::Reservation, 1});
  CHECK(s.policies[1] == PolicySpec{PolicyKind::MkMn, 0});
  CHECK(s.policies[2] == PolicySpec{PolicyKind::Mds, 0});
  CHECK(s.seed == 17);
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("invalid specs are rejected") {
  auto bad = [](const std::string& text, ExperimentKind kind = ExperimentKind::Sweep) {
    ExperimentSpec s = small_sweep();
    s.kind = kind;
    apply_config_text(s, text);
    s.validate();
  };
  CHECK_THROWS_AS(bad("lambda = 1.0, 0.5"), SpecError);
  CHECK_THROWS_AS(bad("lambda = 0.5, 0.5"), SpecError);
  CHECK_THROWS_AS(bad("lambda = -1"), SpecError);
  CHECK_THROWS_AS(bad("lambda = 1.0x"), SpecError);
  CHECK_THROWS_AS(bad("policies = resv"), SpecError);
  CHECK_THROWS_AS(bad("policies = mds:2"), SpecError);
  CHECK_THROWS_AS(bad("policies = resv:-1"), SpecError);
  CHECK_THROWS_AS(bad("policies = fifo:1"), SpecError);
  CHECK_THROWS_AS(bad("policies = resv:1, resv:1"), SpecError);
  CHECK_THROWS_AS(bad("k = 5"), SpecError);
  CHECK_THROWS_AS(bad("metrics = speed"), SpecError);
  CHECK_THROWS_AS(bad("quantiles = 0.95"), SpecError);
  CHECK_THROWS_AS(bad("format = xml"), SpecError);
  CHECK_THROWS_AS(bad("colour = red"), SpecError);
  CHECK_THROWS_AS(bad("no equals sign"), SpecError);
  CHECK_THROWS_AS(bad("horizon = 100"), SpecError);
  CHECK_THROWS_AS(bad("", ExperimentKind::Solve), SpecError);  // mds has no analytic rows
  CHECK_THROWS_AS(bad("policies = resv:1\nmetrics = quantile", ExperimentKind::Solve), SpecError);
  CHECK_THROWS_AS(bad("d = 4", ExperimentKind::DegradedReads), SpecError);
  CHECK_THROWS_AS(preset("fig99"), SpecError);
  CHECK_THROWS_AS(parse_kind("plot"), SpecError);
}

TEST_CASE("every preset validates") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    CHECK_NOTHROW(preset(name).validate());
  }
  auto f1 = preset("fig1");
  CHECK(f1.n == 10);
  CHECK(f1.k == 5);
  CHECK(f1.mu == 1.0);
  CHECK(f1.lambdas.back() == 1.95);
  auto f8 = preset("fig8");
  CHECK(f8.lambdas == std::vector<double>{1.5});
  auto f10 = preset("fig10");
  CHECK(f10.n == 6);
  CHECK(f10.k == 2);
  CHECK(f10.d == 3);
}

TEST_CASE("rows carry provenance consistent with the producing module") {
  auto s = small_sweep();
  const auto tables = compute_experiment(s);
  REQUIRE(tables.count("latency"));
  REQUIRE(tables.count("waiting_probability"));
  for (const auto& [metric, rows] : tables)
    for (const auto& r : rows) {
      CHECK(r.metric == metric);
      CHECK(r.n == 4);
      CHECK(r.k == 2);
      CHECK(r.mu == 1.0);
      if (r.policy == "mds") {
        CHECK(r.method == "simulated");
        CHECK(r.seed == 17u);
        CHECK(r.ci_halfwidth.has_value());
      } else {
        CHECK(r.method == "analytic");
        CHECK_FALSE(r.seed.has_value());
      }
    }
  // Reservation(1) at n=4, k=2 is unstable above 1.92.
  int unstable = 0;
  for (const auto& r : tables.at("latency"))
    if (r.status == "unstable") {
      ++unstable;
      CHECK(r.policy == "resv");
      CHECK(r.lambda == 1.95);
      CHECK_FALSE(r.value.has_value());
    }
  CHECK(unstable == 1);
}

TEST_CASE("csv and json layouts") {
  ResultRow r;
  r.metric = "latency";
  r.policy = "mkmn";
  r.t = 1;
  r.n = 10;
  r.k = 5;
  r.lambda = 1.5;
  r.mu = 1.0;
  r.method = "analytic";
  r.value = 0.1;
  CHECK(format_csv({r}) ==
        "metric,policy,t,n,k,lambda,mu,seed,method,x,value,ci_halfwidth,omitted_mass,status\n"
        "latency,mkmn,1,10,5,1.5,1,,analytic,,0.1,,,ok\n");
  const auto js = format_json({r});
  CHECK(js.find("\"value\": 0.1") != std::string::npos);
  CHECK(js.find("\"seed\": null") != std::string::npos);
}

TEST_CASE("simulate experiments are byte-identical for equal seeds") {
  const auto dir = std::filesystem::temp_directory_path() / "mdsq_experiment_test";
  std::filesystem::remove_all(dir);
  ExperimentSpec s;
  apply_config_text(s, R"(
    n = 4
    k = 2
    lambda = 0.8, 1.6
    policies = mds, resv:2, mkmn:1
    metrics = latency, quantile, occupancy, waiting, throughput
    x_max = 12
    warmup = 500
    horizon = 8000
  )");
  s.kind = ExperimentKind::Simulate;
  for (int rep = 0; rep < 2; ++rep) {
    s.out_dir = dir / std::to_string(rep);
    REQUIRE(run_experiment(s) == 0);
  }
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "0")) {
    ++files;
    CHECK(slurp(e.path()) == slurp(dir / "1" / e.path().filename()));
  }
  CHECK(files == 5);
  s.seed = 2;
  s.out_dir = dir / "other";
  run_experiment(s);
  CHECK(slurp(dir / "0" / "latency.csv") != slurp(dir / "other" / "latency.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("throughput and degraded-read tables") {
  ExperimentSpec t = preset("fig5");
  t.n_max = 8;
  const auto tt = compute_experiment(t);
  REQUIRE(tt.count("throughput_loss"));
  for (const auto& r : tt.at("throughput_loss"))
    if (r.t == 1 && r.n == 4) CHECK(*r.value == doctest::Approx(0.04).epsilon(1e-7));

  ExperimentSpec d = preset("fig10");
  d.lambdas = {0.5, 2.6};
  d.warmup = 100;
  d.horizon = 2000;
  const auto dt = compute_experiment(d);
  const auto& rows = dt.at("degraded_latency");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].x == "reconstruction");
  CHECK(rows[0].n == 5);
  CHECK(rows[0].k == 2);
  CHECK(rows[1].x == "repair");
  CHECK(rows[1].k == 3);
  CHECK(rows[1].mu == 2.0);
  CHECK(rows[2].status == "unstable");  // 2.6 > 5/2
  CHECK(rows[3].status == "ok");
}
