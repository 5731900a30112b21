#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mdsq/experiment.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string format;
  std::string preset;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "key = value experiment file");
  sub->add_option("--out", o.out, "output directory (one file per metric)");
  sub->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--seed", o.seed, "base seed for simulations");
  sub->add_option("--preset", o.preset, "named parameter set applied before the config file");
}

mdsq::ExperimentSpec build_spec(const std::string& kind, const Options& o) {
  mdsq::ExperimentSpec spec;
  if (!o.preset.empty()) spec = mdsq::preset(o.preset);
  if (!o.config.empty()) mdsq::apply_config_file(spec, o.config);
  if (o.config.empty() && o.preset.empty()) throw mdsq::SpecError("give --config and/or --preset");
  spec.kind = mdsq::parse_kind(kind);
  if (!o.out.empty()) spec.out_dir = o.out;
  if (!o.format.empty()) spec.format = o.format == "json" ? mdsq::OutputFormat::Json : mdsq::OutputFormat::Csv;
  if (o.seed) spec.seed = *o.seed;
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MDS queue analysis and simulation"};
  app.require_subcommand(1);
  Options opts;
  std::string chosen;
  for (const char* name : {"solve", "simulate", "throughput", "sweep", "degraded-reads"}) {
    auto* sub = app.add_subcommand(name);
    add_common(sub, opts);
    sub->callback([&chosen, name] { chosen = name; });
  }
  auto* list = app.add_subcommand("presets", "list preset names");
  list->callback([&chosen] { chosen = "presets"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (chosen == "presets") {
    for (const auto& p : mdsq::preset_names()) std::cout << p << '\n';
    return 0;
  }
  try {
    const auto spec = build_spec(chosen, opts);
    const auto tables = mdsq::compute_experiment(spec);
    for (const auto& path : mdsq::write_tables(tables, spec)) std::cout << path.string() << '\n';
    return 0;
  } catch (const mdsq::SpecError& e) {
    std::cerr << "mdsq: invalid experiment: " << e.what() << '\n';
    return 2;
  } catch (const mdsq::ConfigError& e) {
    std::cerr << "mdsq: invalid experiment: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mdsq: " << e.what() << '\n';
    return 1;
  }
}
