#include <omp.h>

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "stt/acceptance.hpp"
#include "stt/error.hpp"

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  int workers = -1;
  long long seed = -1;
};

void add_global_flags(CLI::App* app, GlobalArgs& args) {
  app->add_option("--config", args.config_path, "experiment config file (JSON)");
  app->add_option("--out", args.out_dir, "output directory");
  app->add_option("--workers", args.workers, "worker threads (0 = all cores)");
  app->add_option("--seed", args.seed, "random seed override");
}

int run(const GlobalArgs& args, const std::string& experiment) {
  stt::ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = stt::ExperimentConfig::load(args.config_path);
  cfg.experiment = experiment;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.workers >= 0) cfg.workers = args.workers;
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  cfg.validate();
  if (cfg.workers > 0) omp_set_num_threads(cfg.workers);

  const stt::RunReport rep = stt::run_experiment(cfg);
  std::printf("experiment %s -> %s/report.json (config %s)\n", cfg.experiment.c_str(),
              cfg.out_dir.c_str(), cfg.hash_hex().c_str());
  for (const auto& c : rep.criteria)
    std::printf("[%s] criterion %2d: %s (measured=%.3e, threshold=%.3e, %.1f s)\n",
                c.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), c.measured, c.threshold,
                c.seconds);
  if (!rep.criteria.empty())
    std::printf("%s\n", rep.all_pass() ? "all criteria PASS" : "some criteria FAIL");
  return rep.criteria.empty() || rep.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"boundary-rigidity experiments for stationary spacetimes"};
  app.require_subcommand(1);
  GlobalArgs args;

  struct Cmd {
    CLI::App* sub;
    std::string experiment;
  };
  std::vector<Cmd> cmds;

  auto add = [&](CLI::App* parent, const char* name, const char* desc,
                 const std::string& experiment) {
    CLI::App* sub = parent->add_subcommand(name, desc);
    add_global_flags(sub, args);
    cmds.push_back({sub, experiment});
    return sub;
  };

  CLI::App* metric = app.add_subcommand("metric", "metric family utilities");
  metric->require_subcommand(1);
  add(metric, "dump", "write sampled metric fields as CSV", "metric-dump");

  CLI::App* flow = app.add_subcommand("flow", "bicharacteristic flow utilities");
  flow->require_subcommand(1);
  add(flow, "trace", "trace one bicharacteristic to the boundary", "flow-trace");

  CLI::App* tau = app.add_subcommand("tau", "time-separation data");
  tau->require_subcommand(1);
  add(tau, "table", "boundary pair table of the time separation", "tau");

  add(&app, "scatter", "scattering relation records", "scatter");
  add(&app, "straighten", "geodesic straightening report", "straighten");

  CLI::App* identity = app.add_subcommand("identity", "integral-identity experiments");
  identity->require_subcommand(1);
  add(identity, "run", "per-ray integral identity records", "identity");

  CLI::App* fourier = app.add_subcommand("fourier", "frequency-domain experiments");
  fourier->require_subcommand(1);
  add(fourier, "run", "slice oracle, kernel bound and cone experiments", "fourier");

  CLI::App* riem = app.add_subcommand("riemannian", "boundary-distance experiments");
  riem->require_subcommand(1);
  add(riem, "run", "the Riemannian pipeline", "riemannian");

  add(&app, "full", "all pipelines plus the acceptance criteria", "full");

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& c : cmds)
      if (c.sub->parsed()) return run(args, c.experiment);
    std::fprintf(stderr, "no subcommand selected\n");
    return 2;
  } catch (const stt::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 3;
  }
}
