#include <iostream>

#include <CLI11.hpp>

#include "cli.hpp"

namespace cli = gspline::cli;

int main(int argc, char** argv) {
  CLI::App app{"Generalized time-dependent splines from minimum-energy control problems"};
  app.require_subcommand(1);

  cli::Options opt;
  std::string profile;
  std::size_t samples = 0;
  double t0 = 0.0, t1 = 0.0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("problem", opt.path, "Problem file (JSON)")->required();
    sub->add_option("--profile", profile, "Tolerance profile: strict, default or loose");
    sub->add_option("--samples", samples, "Samples per segment in the CSV");
    sub->add_option("--seed", opt.seed, "Seed for randomized checks");
    sub->add_flag("--skip-hypotheses", opt.skip_hypotheses, "Do not check H1-H3 before solving");
  };

  CLI::App* solve = app.add_subcommand("solve", "Solve and write trajectory.csv and summary.json");
  common(solve);
  solve->add_option("--output", opt.output_dir, "Output directory")->capture_default_str();

  CLI::App* verify = app.add_subcommand("verify", "Solve and print the residual report");
  common(verify);

  CLI::App* ctrl = app.add_subcommand("controllability", "Controllability Gramian W on a window");
  common(ctrl);
  CLI::Option* t0_opt = ctrl->add_option("--t0", t0, "Window start (default: first knot)");
  CLI::Option* t1_opt = ctrl->add_option("--t1", t1, "Window end (default: last knot)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kInputError;
  }

  if (!profile.empty()) opt.profile = profile;
  if (samples != 0) opt.samples = samples;
  if (t0_opt->count()) opt.t0 = t0;
  if (t1_opt->count()) opt.t1 = t1;

  if (solve->parsed()) return cli::run_solve(opt, std::cout, std::cerr);
  if (verify->parsed()) return cli::run_verify(opt, std::cout, std::cerr);
  return cli::run_controllability(opt, std::cout, std::cerr);
}
