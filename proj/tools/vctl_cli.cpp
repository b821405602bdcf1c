#include <CLI11.hpp>

#include <iostream>
#include <map>

#include "vctl/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Optimal control of stochastic Volterra equations with completely monotone kernels"};
  app.require_subcommand(1);

  vctl::RunOptions opt;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out, value;
  std::string report_dir;

  struct Flags {
    CLI::Option *out, *seed, *threads, *value;
  };
  std::map<CLI::App*, Flags> flags;
  for (const auto& name : vctl::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config_path, "experiment configuration (YAML)")->required();
    Flags f{sub->add_option("--out", out, "output directory (overrides output_dir)"),
            sub->add_option("--seed", seed, "random seed (overrides simulation.seed)"),
            sub->add_option("--threads", threads, "OpenMP threads"), nullptr};
    if (name == "simulate" || name == "verify") f.value = sub->add_option("--value", value, "value grid snapshot to reuse");
    flags[sub] = f;
  }
  auto* report = app.add_subcommand("report", "aggregate the artifacts of a run directory");
  report->add_option("--out,--dir", report_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : vctl::exit_config;
  }

  if (*report) return vctl::emit_report(report_dir, std::cout, std::cerr);

  for (auto* sub : app.get_subcommands()) {
    const auto& f = flags.at(sub);
    if (f.out->count()) opt.out_dir = out;
    if (f.seed->count()) opt.seed = seed;
    if (f.threads->count()) opt.threads = threads;
    if (f.value && f.value->count()) opt.value_snapshot = value;
    return vctl::run_subcommand(sub->get_name(), opt, std::cout, std::cerr);
  }
  return vctl::exit_config;
}
