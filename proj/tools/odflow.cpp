#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "odflow/cli.hpp"

namespace {

// Flag plumbing shared by the fitting commands.
struct FitFlags {
  std::string init = "static";
  std::string scaling = "auto";
  std::string scale_rule = "lambda-over-c";
  std::uint64_t init_seed = 0;
  bool init_seed_set = false;
  std::vector<double> beta_bounds;
  std::vector<odflow::Index> window_index;
  std::vector<std::int64_t> window_time;
};

void add_fit_options(CLI::App* cmd, odflow::RunConfig& config, FitFlags& flags) {
  cmd->add_option("--counts", config.counts_path, "counts CSV (region_id,timestamp,count)")
      ->required();
  cmd->add_option("--centroids", config.centroids_path, "centroid CSV (region_id,x,y)")
      ->required();
  cmd->add_option("--truth", config.truth_path,
                  "optional truth flows CSV; enables error metrics in the report");
  cmd->add_option("--cutoff", config.solver.cutoff, "travel cutoff distance K")->required();
  cmd->add_option("--lambda", config.solver.lambda, "conservation penalty weight");
  cmd->add_option("--epsilon", config.solver.epsilon, "outer-loop relative change threshold");
  cmd->add_option("--max-outer", config.solver.max_outer, "outer iteration cap");
  cmd->add_option("--seed", config.solver.seed, "solver randomization seed");
  cmd->add_option("--scaling", flags.scaling, "count scaling mode")
      ->check(CLI::IsMember({"auto", "factor", "off"}));
  cmd->add_option("--scale-factor", config.scale_factor, "factor for --scaling factor");
  cmd->add_option("--target-min-flow", config.target_min_flow,
                  "smallest per-entry flow the auto scaler aims for");
  cmd->add_option("--scale-rule", flags.scale_rule, "penalty rescaling rule")
      ->check(CLI::IsMember({"lambda-over-c", "lambda-over-c2"}));
  cmd->add_option("--beta-bounds", flags.beta_bounds,
                  "distance-decay search interval (two numbers)")
      ->expected(2);
  cmd->add_option("--init", flags.init, "flow initialization strategy")
      ->check(CLI::IsMember({"static", "jittered", "moving"}));
  cmd->add_option("--init-seed", flags.init_seed, "seed for the jittered initialization")
      ->trigger_on_parse()
      ->each([&flags](const std::string&) { flags.init_seed_set = true; });
  cmd->add_option("--window-index", flags.window_index,
                  "inclusive snapshot index window (two numbers)")
      ->expected(2);
  cmd->add_option("--window-time", flags.window_time,
                  "inclusive timestamp window (two numbers)")
      ->expected(2);
}

void resolve_fit_flags(const FitFlags& flags, odflow::RunConfig& config) {
  if (flags.scaling == "auto") config.scaling = odflow::ScalingMode::Auto;
  if (flags.scaling == "factor") config.scaling = odflow::ScalingMode::Factor;
  if (flags.scaling == "off") config.scaling = odflow::ScalingMode::Off;
  config.scale_rule = flags.scale_rule == "lambda-over-c2" ? odflow::ScaleRule::LambdaOverC2
                                                           : odflow::ScaleRule::LambdaOverC;
  if (flags.init == "static") config.init.kind = odflow::InitKind::Static;
  if (flags.init == "jittered") config.init.kind = odflow::InitKind::StaticJittered;
  if (flags.init == "moving") config.init.kind = odflow::InitKind::Moving;
  if (flags.init_seed_set) config.init.seed = flags.init_seed;
  if (!flags.beta_bounds.empty())
    config.solver.beta_bounds = odflow::BetaBounds{flags.beta_bounds[0], flags.beta_bounds[1]};
  if (!flags.window_index.empty())
    config.window.indices = std::make_pair(flags.window_index[0], flags.window_index[1]);
  if (!flags.window_time.empty())
    config.window.timestamps = std::make_pair(flags.window_time[0], flags.window_time[1]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"origin-destination flow inference from aggregate region counts"};
  app.require_subcommand(1);

  odflow::RunConfig config;
  FitFlags flags;
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic panel with known flows");
  simulate->add_option("--scenario", config.scenario_path, "scenario JSON file");
  simulate->add_option("--benchmark", config.benchmark, "built-in scenario")
      ->check(CLI::IsMember({"grid", "ring"}));
  simulate->add_option("--nu", config.ring_nu, "ring benchmark population scale");
  simulate->add_option("--steps", config.steps_override, "number of transitions");
  simulate->add_option("--noise", config.noise_override, "observation noise fraction");
  simulate->add_option("--seed", sim_seed, "simulation seed")
      ->trigger_on_parse()
      ->each([&sim_seed_set](const std::string&) { sim_seed_set = true; });
  simulate->add_option("--out", config.out_dir, "output directory")->required();

  auto* fit_exact = app.add_subcommand("fit-exact", "fit flows by full alternating maximization");
  add_fit_options(fit_exact, config, flags);
  fit_exact->add_option("--out", config.out_dir, "output directory")->required();

  auto* fit_approx =
      app.add_subcommand("fit-approx", "fit flows by the decoupled fast approximation");
  add_fit_options(fit_approx, config, flags);
  fit_approx->add_option("--rounds", config.outer.max_rounds, "feedback rounds");
  double rel_change = 0.0, nae_target = 0.0;
  bool rel_change_set = false, nae_target_set = false;
  fit_approx->add_option("--rel-change", rel_change, "stop when round-to-round flow change drops below")
      ->trigger_on_parse()
      ->each([&rel_change_set](const std::string&) { rel_change_set = true; });
  fit_approx->add_option("--nae-target", nae_target, "with --truth: stop at this error")
      ->trigger_on_parse()
      ->each([&nae_target_set](const std::string&) { nae_target_set = true; });
  fit_approx->add_flag("--truth-feedback", config.truth_feedback,
                       "let the round loop consult the truth flows");
  fit_approx->add_option("--out", config.out_dir, "output directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "score an estimated flow file against truth");
  evaluate->add_option("--centroids", config.centroids_path, "centroid CSV")->required();
  evaluate->add_option("--truth", config.truth_path, "truth flows CSV")->required();
  evaluate->add_option("--estimate", config.estimate_path, "estimated flows CSV")->required();
  evaluate->add_option("--out", config.out_dir, "output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "grid over lambda and/or epsilon");
  add_fit_options(sweep, config, flags);
  sweep->add_option("--lambdas", config.sweep_lambdas, "lambda values to visit");
  sweep->add_option("--epsilons", config.sweep_epsilons, "epsilon values to visit");
  sweep->add_flag("--approx", config.sweep_approx, "sweep the approximate solver");
  sweep->add_option("--rounds", config.outer.max_rounds, "feedback rounds for --approx");
  sweep->add_option("--out", config.out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (simulate->parsed()) {
    config.command = odflow::Command::Simulate;
    if (sim_seed_set) config.seed_override = sim_seed;
  } else if (fit_exact->parsed()) {
    config.command = odflow::Command::FitExact;
  } else if (fit_approx->parsed()) {
    config.command = odflow::Command::FitApprox;
    if (rel_change_set) config.outer.rel_change_threshold = rel_change;
    if (nae_target_set) config.outer.nae_target = nae_target;
  } else if (evaluate->parsed()) {
    config.command = odflow::Command::Evaluate;
  } else if (sweep->parsed()) {
    config.command = odflow::Command::Sweep;
  }
  resolve_fit_flags(flags, config);
  return odflow::run_command(config);
}
