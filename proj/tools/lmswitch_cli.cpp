#include <iostream>

#include <CLI11.hpp>

#include "lmswitch/cli.hpp"

int main(int argc, char** argv) {
  using namespace lmswitch;
  CLI::App app{"Observer-based dwell-time switching: design, certify, simulate"};
  app.require_subcommand(1);
  cli::Options opt;
  int example = 0;

  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", opt.config, "problem config (*.config.json)");
    if (needs_config) c->required();
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
    sub->add_option("--grid-stencil", opt.grid_stencil, "solve-grid spacing on [0, T]");
    sub->add_option("--seed", opt.seed, "seed for jittered sampling");
    sub->add_option("--finer", opt.finer, "refinement factor for the post-hoc check")->capture_default_str();
  };

  auto* design = app.add_subcommand("design", "observer gains and Lyapunov-Metzler certificate");
  common(design, true);
  auto* certify = app.add_subcommand("certify", "synthesise and verify the stability certificate");
  common(certify, true);
  certify->add_option("--design", opt.design, "design certificate (default <out>/<name>.design.cert.json)");
  auto* simulate = app.add_subcommand("simulate", "closed-loop simulation and trace checks");
  common(simulate, true);
  simulate->add_option("--design", opt.design, "design certificate");
  simulate->add_option("--certificate", opt.certificate, "stability certificate");
  simulate->add_flag("--plot", opt.plot, "also write trace.svg");
  auto* reproduce = app.add_subcommand("reproduce", "run a built-in example end to end");
  common(reproduce, false);
  reproduce->add_option("example", example, "example id (1 or 2)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kInputError;
  }

  const cli::Streams io{std::cout, std::cerr};
  if (*design) return cli::cmd_design(opt, io);
  if (*certify) return cli::cmd_certify(opt, io);
  if (*simulate) return cli::cmd_simulate(opt, io);
  return cli::cmd_reproduce(example, opt, io);
}
