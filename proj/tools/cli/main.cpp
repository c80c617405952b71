#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "cylising/propagators.hpp"

namespace {

using cylising::cli::RunConfig;

void add_common(CLI::App* sub, RunConfig& cfg, bool model) {
  if (model) {
    sub->add_option("--L", cfg.L, "Cylinder circumference (even)");
    sub->add_option("--M", cfg.M, "Number of rows");
    sub->add_option("--t1", cfg.t1, "Horizontal parameter tanh(beta J1)");
    sub->add_option("--t2", cfg.t2, "Vertical parameter; derived from t1 on the critical line when omitted");
    sub->add_option("--beta", cfg.beta, "Inverse temperature (alternative to --t1/--t2)");
    sub->add_option("--J1", cfg.J1, "Horizontal coupling (with --beta, default 1)");
    sub->add_option("--J2", cfg.J2, "Vertical coupling (with --beta, default 1)");
    sub->add_flag("--critical", cfg.critical, "Force t2 = (1 - t1)/(1 + t1)");
    sub->add_option("--tol", cfg.tol, "Verification tolerance override");
  }
  sub->add_option("-o,--output", cfg.output, "Output file (default: stdout)");
  sub->add_option("--format", cfg.format, "json or csv");
  sub->add_flag("--verify", cfg.verify, "Run the oracles alongside and fail on residuals above tolerance");
  sub->add_option("--seed", cfg.seed, "Seed of the randomized batteries");
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = cylising::cli;
  CLI::App app{"Free-fermion and multiscale toolkit for the Ising model on a cylinder"};
  app.set_version_flag("--version", cli::program_version);
  app.require_subcommand(1);
  app.footer("Environment: CYLISING_THREADS sets the worker count.\n"
             "Exit codes: 0 ok, 1 configuration error, 2 verification failure, 3 numerical failure.");
  RunConfig cfg;

  auto* prop = app.add_subcommand("propagator", "Propagator tables with symmetry and boundary residuals");
  add_common(prop, cfg, true);
  prop->add_option("--field", cfg.field, "phi (critical fields) or xi (massive fields)");

  auto* part = app.add_subcommand("partition", "Partition function from Pfaffians (enumeration with --verify)");
  add_common(part, cfg, true);

  auto* corr = app.add_subcommand("correlate", "Energy moments and cumulants");
  add_common(corr, cfg, true);
  corr->add_option("--edges", cfg.edges, "Edges as \"(x1,x2,h|v),...\"");

  auto* scal = app.add_subcommand("scaling", "Convergence to the scaling limit under halving of the spacing");
  add_common(scal, cfg, true);
  scal->add_option("--points", cfg.points, "Two points \"(z1,z2),(w1,w2)\"");
  scal->add_option("--halvings", cfg.halvings, "Number of halvings of the spacing");
  scal->add_option("--a0", cfg.a0, "Coarsest lattice spacing");
  scal->add_option("--ell1", cfg.ell1, "Continuum circumference");
  scal->add_option("--ell2", cfg.ell2, "Continuum height");

  auto* ms = app.add_subcommand("multiscale", "Scale decomposition: reconstruction, decay fits, bulk/edge profiles");
  add_common(ms, cfg, true);
  ms->add_option("--scales", cfg.scales, "Scales for the bulk/edge split, e.g. \"0,-1\"");
  ms->add_option("--inf-tol", cfg.inf_tol, "Convergence tolerance of the infinite-volume kernels");

  auto* ker = app.add_subcommand("kernels", "Localization cancellations, norm inequalities and an RG step");
  add_common(ker, cfg, true);
  ker->add_option("--demo", cfg.demo, "cancellations, norms, rg or all");
  ker->add_option("--samples", cfg.samples, "Random kernels per check");
  ker->add_option("--Z", cfg.Z, "Field-strength factor of the initial potential");
  ker->add_option("--s-max", cfg.s_max, "Cumulant truncation order");
  ker->add_option("--rg-L", cfg.rg_L, "Circumference of the RG-step cylinder");
  ker->add_option("--rg-M", cfg.rg_M, "Rows of the RG-step cylinder");

  auto* self = app.add_subcommand("selftest", "Full acceptance suite with a JSON report");
  add_common(self, cfg, false);
  self->add_option("--criteria", cfg.criteria, "Subset of criteria, e.g. \"1,2,5\"");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::exit_ok : cli::exit_config;
  }
  cfg.command = app.get_subcommands().front()->get_name();

  cli::CommandOutput out;
  try {
    out = cli::run_command(cfg);
  } catch (const cli::ConfigError& e) {
    for (const auto& f : e.fields) std::cerr << "config error: " << f << "\n";
    return cli::exit_config;
  } catch (const cylising::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return cli::exit_numerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::exit_config;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return cli::exit_numerical;
  }

  const std::string doc = cli::render(cfg, out);
  if (cfg.output.empty()) {
    std::cout << doc;
  } else {
    std::ofstream f(cfg.output, std::ios::binary);
    if (!(f << doc)) {
      std::cerr << "config error: output: cannot write " << cfg.output << "\n";
      return cli::exit_config;
    }
  }
  for (const auto& line : out.log) std::cerr << line << "\n";

  bool ok = true;
  if (cfg.verify || out.always_checked)
    for (const auto& c : out.checks) {
      std::fprintf(stderr, "%s %s: %.3e %s %.1e\n", c.ok() ? "[ok]  " : "[FAIL]", c.name.c_str(), c.value,
                   c.at_least ? ">=" : "<=", c.limit);
      ok = ok && c.ok();
    }
  return ok ? cli::exit_ok : cli::exit_verification;
}
