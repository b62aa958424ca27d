#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "odflow/approx_solver.hpp"
#include "odflow/exact_solver.hpp"
#include "odflow/io.hpp"
#include "odflow/metrics.hpp"
#include "odflow/scaling.hpp"
#include "odflow/simulator.hpp"
#include "odflow/types.hpp"

namespace odflow {

enum class Command { Simulate, FitExact, FitApprox, Evaluate, Sweep };
enum class ScalingMode { Auto, Factor, Off };

struct RunConfig {
  Command command = Command::Simulate;

  // input files
  std::string counts_path;
  std::string centroids_path;
  std::string truth_path;      // flows CSV used as ground truth
  std::string estimate_path;   // flows CSV under evaluation
  std::string scenario_path;
  std::string out_dir;

  // built-in scenarios for `simulate` when no scenario file is given
  std::string benchmark;       // "grid" or "ring"
  double ring_nu = 1e5;
  int steps_override = 0;          // > 0 replaces the scenario's step count
  double noise_override = -1.0;    // >= 0 replaces the scenario's noise fraction
  std::optional<std::uint64_t> seed_override;

  SolverConfig solver;
  ScalingMode scaling = ScalingMode::Auto;
  double scale_factor = 1.0;       // used by ScalingMode::Factor
  double target_min_flow = 1.0;    // used by ScalingMode::Auto
  ScaleRule scale_rule = ScaleRule::LambdaOverC;
  InitStrategy init{InitKind::Static, std::nullopt};

  OuterLoopConfig outer;           // approximate solver rounds and stop rules
  bool truth_feedback = false;     // let the approximate solver consult the truth

  TimeWindow window;

  std::vector<double> sweep_lambdas;
  std::vector<double> sweep_epsilons;
  bool sweep_approx = false;
};

inline const char* command_name(Command c) {
  switch (c) {
    case Command::Simulate: return "simulate";
    case Command::FitExact: return "fit-exact";
    case Command::FitApprox: return "fit-approx";
    case Command::Evaluate: return "evaluate";
    case Command::Sweep: return "sweep";
  }
  return "?";
}

namespace detail {

inline nlohmann::json config_echo(const RunConfig& config) {
  nlohmann::json j;
  j["command"] = command_name(config.command);
  j["counts"] = config.counts_path;
  j["centroids"] = config.centroids_path;
  j["truth"] = config.truth_path;
  j["estimate"] = config.estimate_path;
  j["scenario"] = config.scenario_path;
  j["out_dir"] = config.out_dir;
  j["benchmark"] = config.benchmark;
  j["cutoff"] = config.solver.cutoff;
  j["lambda"] = config.solver.lambda;
  j["epsilon"] = config.solver.epsilon;
  j["max_outer"] = config.solver.max_outer;
  j["seed"] = config.solver.seed;
  if (config.solver.beta_bounds.has_value()) {
    j["beta_bounds"] = {config.solver.beta_bounds->lo, config.solver.beta_bounds->hi};
  }
  switch (config.scaling) {
    case ScalingMode::Auto: j["scaling"] = "auto"; break;
    case ScalingMode::Factor: j["scaling"] = "factor"; break;
    case ScalingMode::Off: j["scaling"] = "off"; break;
  }
  j["scale_factor"] = config.scale_factor;
  j["target_min_flow"] = config.target_min_flow;
  j["scale_rule"] = config.scale_rule == ScaleRule::LambdaOverC ? "lambda-over-c"
                                                                : "lambda-over-c2";
  switch (config.init.kind) {
    case InitKind::Static: j["init"] = "static"; break;
    case InitKind::StaticJittered: j["init"] = "jittered"; break;
    case InitKind::Moving: j["init"] = "moving"; break;
  }
  if (config.init.seed.has_value()) j["init_seed"] = *config.init.seed;
  j["rounds"] = config.outer.max_rounds;
  if (config.outer.rel_change_threshold.has_value())
    j["rel_change_threshold"] = *config.outer.rel_change_threshold;
  if (config.outer.nae_target.has_value()) j["nae_target"] = *config.outer.nae_target;
  j["truth_feedback"] = config.truth_feedback;
  if (config.window.indices.has_value())
    j["window_indices"] = {config.window.indices->first, config.window.indices->second};
  if (config.window.timestamps.has_value())
    j["window_timestamps"] = {config.window.timestamps->first, config.window.timestamps->second};
  if (!config.sweep_lambdas.empty()) j["sweep_lambdas"] = config.sweep_lambdas;
  if (!config.sweep_epsilons.empty()) j["sweep_epsilons"] = config.sweep_epsilons;
  if (config.command == Command::Sweep) j["sweep_solver"] = config.sweep_approx ? "approx" : "exact";
  return j;
}

inline nlohmann::json trace_json(const std::vector<LikelihoodBreakdown<double>>& trace) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& b : trace) {
    arr.push_back({{"L0", b.L0}, {"L1", b.L1}, {"L2", b.L2}, {"C", b.C}, {"total", b.total}});
  }
  return arr;
}

inline nlohmann::json plan_json(const ScalePlan& plan) {
  return {{"c", plan.c},
          {"lambda_original", plan.lambda_original},
          {"lambda_scaled", plan.lambda_scaled}};
}

inline ScalePlan make_plan(const RunConfig& config, const CountPanel<double>& N,
                           const NeighborSets& gamma) {
  switch (config.scaling) {
    case ScalingMode::Auto:
      return plan_scaling(N, gamma, config.target_min_flow, config.solver.lambda,
                          config.scale_rule);
    case ScalingMode::Factor: {
      if (!(config.scale_factor >= 1.0))
        throw InputError("scaling factor must be >= 1");
      ScalePlan plan;
      plan.c = config.scale_factor;
      plan.lambda_original = config.solver.lambda;
      plan.lambda_scaled = config.scale_rule == ScaleRule::LambdaOverC
                               ? config.solver.lambda / plan.c
                               : config.solver.lambda / (plan.c * plan.c);
      return plan;
    }
    case ScalingMode::Off: {
      ScalePlan plan;
      plan.c = 1.0;
      plan.lambda_original = config.solver.lambda;
      plan.lambda_scaled = config.solver.lambda;
      return plan;
    }
  }
  throw InputError("unknown scaling mode");
}

struct FitOutcome {
  FitResult<double> result;   // flows already back on the input count scale
  ScalePlan plan;
  std::optional<double> nae_value;
  std::optional<double> offdiag_nae_value;
};

/// Shared fit pipeline: geometry, scaling, solve, descale, optional metrics.
inline FitOutcome run_fit(const RunConfig& config, bool approx, const CountPanel<double>& N,
                          const RegionSet& regions, const FlowTensor<double>* truth) {
  if (!(config.solver.cutoff > 0)) throw InputError("travel cutoff must be positive");
  if (!(config.solver.epsilon > 0)) throw InputError("epsilon must be positive");
  if (config.solver.lambda < 0) throw InputError("lambda must be non-negative");

  const Mat<double> d = build_distance_matrix(regions);
  const NeighborSets gamma = neighbor_sets(d, config.solver.cutoff);

  FitOutcome outcome;
  outcome.plan = make_plan(config, N, gamma);
  const CountPanel<double> scaled = apply_scaling(N, outcome.plan);
  SolverConfig solver = config.solver;
  solver.lambda = outcome.plan.lambda_scaled;

  FlowTensor<double> scaled_truth;
  const FlowTensor<double>* feedback = nullptr;
  if (truth != nullptr && approx && config.truth_feedback) {
    scaled_truth = *truth;
    for (auto& slice : scaled_truth) slice *= outcome.plan.c;
    feedback = &scaled_truth;
  }

  if (approx) {
    outcome.result = fit_approx<double>(scaled, d, gamma, solver, config.outer, feedback);
  } else {
    outcome.result = fit_exact<double>(scaled, d, gamma, solver, config.init);
  }
  outcome.result.M = descale_flows(outcome.result.M, outcome.plan);

  if (truth != nullptr) {
    outcome.nae_value = nae(outcome.result.M, *truth);
    outcome.offdiag_nae_value = offdiag_nae(outcome.result.M, *truth);
  }
  return outcome;
}

/// Truth slices aligned to the loaded window: step t of the panel corresponds
/// to step first_snapshot + t of the truth file.
inline FlowTensor<double> window_truth(const std::string& path, const LoadedCounts& loaded) {
  const auto records = read_flows(path);
  const Index steps = loaded.panel.rows() - 1;
  FlowTensor<double> full = flows_to_tensor(records, loaded.regions,
                                            loaded.first_snapshot + steps);
  FlowTensor<double> out;
  out.reserve(static_cast<std::size_t>(steps));
  for (Index t = 0; t < steps; ++t) {
    out.push_back(std::move(full[static_cast<std::size_t>(loaded.first_snapshot + t)]));
  }
  return out;
}

}  // namespace detail

/// Execute one command, writing every output into config.out_dir. A report
/// document is always produced; failures land in its "error" field and the
/// return value is the process exit status.
inline int run_command(const RunConfig& config) {
  namespace fs = std::filesystem;
  const auto started = std::chrono::steady_clock::now();
  nlohmann::json report;
  report["config"] = detail::config_echo(config);

  const auto finish = [&](int status) {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    report["wall_time_seconds"] = elapsed.count();
    report["status"] = status == 0 ? "ok" : "error";
    fs::create_directories(config.out_dir);
    auto out = detail::open_writer((fs::path(config.out_dir) / "report.json").string());
    out << report.dump(2) << '\n';
    return status;
  };

  try {
    if (config.out_dir.empty()) throw InputError("an output directory is required");
    fs::create_directories(config.out_dir);
    const auto out_path = [&](const char* name) {
      return (fs::path(config.out_dir) / name).string();
    };

    switch (config.command) {
      case Command::Simulate: {
        ScenarioSpec spec;
        if (!config.scenario_path.empty()) {
          spec = read_scenario(config.scenario_path);
        } else if (config.benchmark == "grid") {
          spec = make_benchmark_grid(config.seed_override.value_or(7));
        } else if (config.benchmark == "ring") {
          spec = make_benchmark_ring(config.ring_nu, config.steps_override > 0
                                                         ? config.steps_override
                                                         : 3,
                                     config.seed_override.value_or(7));
        } else {
          throw InputError("simulate needs a scenario file or a named benchmark");
        }
        if (config.steps_override > 0) spec.steps = config.steps_override;
        if (config.noise_override >= 0) spec.noise_fraction = config.noise_override;
        if (config.seed_override.has_value()) spec.seed = *config.seed_override;

        const SyntheticTruth truth = simulate(spec);
        write_centroids(out_path("centroids.csv"), spec.regions);
        write_counts(out_path("counts.csv"), truth.N, spec.regions);
        const Mat<double> d = build_distance_matrix(spec.regions);
        const NeighborSets gamma = neighbor_sets(d, spec.cutoff);
        write_flows(out_path("truth_flows.csv"), truth.M_true, spec.regions, gamma);
        write_scenario(out_path("scenario.json"), spec);
        report["snapshots"] = truth.N.rows();
        report["regions"] = spec.regions.size();
        break;
      }

      case Command::FitExact:
      case Command::FitApprox: {
        const bool approx = config.command == Command::FitApprox;
        if (config.centroids_path.empty()) throw InputError("a centroid file is required");
        if (config.counts_path.empty()) throw InputError("a counts file is required");
        const RegionSet all_regions = read_centroids(config.centroids_path);
        const LoadedCounts loaded = load_counts(config.counts_path, all_regions, config.window);
        if (!loaded.dropped.empty()) {
          report["dropped_regions"] = loaded.dropped;
          std::cerr << "discarding " << loaded.dropped.size()
                    << " region(s) with missing data in the selected window\n";
        }

        FlowTensor<double> truth;
        const FlowTensor<double>* truth_ptr = nullptr;
        if (!config.truth_path.empty()) {
          truth = detail::window_truth(config.truth_path, loaded);
          truth_ptr = &truth;
        }

        const detail::FitOutcome outcome =
            detail::run_fit(config, approx, loaded.panel, loaded.regions, truth_ptr);

        const Mat<double> d = build_distance_matrix(loaded.regions);
        const NeighborSets gamma = neighbor_sets(d, config.solver.cutoff);
        write_flows(out_path("flows.csv"), outcome.result.M, loaded.regions, gamma);
        write_params(out_path("params.json"), outcome.result.params, loaded.regions);

        report["scale_plan"] = detail::plan_json(outcome.plan);
        report["trace"] = detail::trace_json(outcome.result.trace);
        report["termination"] = outcome.result.termination == FitTermination::Converged
                                    ? "converged"
                                    : "max_outer_iterations";
        report["outer_iterations"] = outcome.result.outer_iterations;
        report["cycle_retries"] = outcome.result.cycle_retries;
        report["warnings"] = outcome.result.warnings;
        if (!outcome.result.round_changes.empty())
          report["round_changes"] = outcome.result.round_changes;
        if (!outcome.result.round_errors.empty())
          report["round_errors"] = outcome.result.round_errors;
        if (outcome.nae_value.has_value()) {
          report["metrics"] = {{"nae", *outcome.nae_value},
                               {"offdiag_nae", *outcome.offdiag_nae_value}};
          std::cout << "nae=" << *outcome.nae_value
                    << " offdiag_nae=" << *outcome.offdiag_nae_value << '\n';
        }
        break;
      }

      case Command::Evaluate: {
        if (config.centroids_path.empty()) throw InputError("a centroid file is required");
        if (config.truth_path.empty() || config.estimate_path.empty())
          throw InputError("evaluate needs --truth and --estimate flow files");
        const RegionSet regions = read_centroids(config.centroids_path);
        const auto truth_records = read_flows(config.truth_path);
        const auto estimate_records = read_flows(config.estimate_path);
        Index steps = 0;
        for (const auto& r : truth_records) steps = std::max(steps, static_cast<Index>(r.t) + 1);
        for (const auto& r : estimate_records) steps = std::max(steps, static_cast<Index>(r.t) + 1);
        const FlowTensor<double> truth = flows_to_tensor(truth_records, regions, steps);
        const FlowTensor<double> estimate = flows_to_tensor(estimate_records, regions, steps);
        const double nae_value = nae(estimate, truth);
        const double offdiag_value = offdiag_nae(estimate, truth);
        report["metrics"] = {{"nae", nae_value}, {"offdiag_nae", offdiag_value}};
        std::cout << "nae=" << nae_value << " offdiag_nae=" << offdiag_value << '\n';
        break;
      }

      case Command::Sweep: {
        if (config.centroids_path.empty()) throw InputError("a centroid file is required");
        if (config.counts_path.empty()) throw InputError("a counts file is required");
        const RegionSet all_regions = read_centroids(config.centroids_path);
        const LoadedCounts loaded = load_counts(config.counts_path, all_regions, config.window);
        if (!loaded.dropped.empty()) report["dropped_regions"] = loaded.dropped;

        FlowTensor<double> truth;
        const FlowTensor<double>* truth_ptr = nullptr;
        if (!config.truth_path.empty()) {
          truth = detail::window_truth(config.truth_path, loaded);
          truth_ptr = &truth;
        }

        std::vector<double> lambdas = config.sweep_lambdas;
        if (lambdas.empty()) lambdas.push_back(config.solver.lambda);
        std::vector<double> epsilons = config.sweep_epsilons;
        if (epsilons.empty()) epsilons.push_back(config.solver.epsilon);

        auto out = detail::open_writer(out_path("sweep.csv"));
        out << "lambda,epsilon,nae,offdiag_nae,final_C,final_total,outer_iterations\n";
        nlohmann::json rows = nlohmann::json::array();
        for (const double lambda : lambdas) {
          for (const double epsilon : epsilons) {
            RunConfig point = config;
            point.solver.lambda = lambda;
            point.solver.epsilon = epsilon;
            const detail::FitOutcome outcome = detail::run_fit(
                point, config.sweep_approx, loaded.panel, loaded.regions, truth_ptr);
            const auto& back = outcome.result.trace.back();
            out << detail::format_double(lambda) << ',' << detail::format_double(epsilon) << ','
                << detail::format_double(outcome.nae_value.value_or(
                       std::numeric_limits<double>::quiet_NaN()))
                << ','
                << detail::format_double(outcome.offdiag_nae_value.value_or(
                       std::numeric_limits<double>::quiet_NaN()))
                << ',' << detail::format_double(back.C) << ','
                << detail::format_double(back.total) << ',' << outcome.result.outer_iterations
                << '\n';
            nlohmann::json row = {{"lambda", lambda},
                                  {"epsilon", epsilon},
                                  {"final_C", back.C},
                                  {"final_total", back.total},
                                  {"outer_iterations", outcome.result.outer_iterations},
                                  {"scale_plan", detail::plan_json(outcome.plan)}};
            if (outcome.nae_value.has_value()) {
              row["nae"] = *outcome.nae_value;
              row["offdiag_nae"] = *outcome.offdiag_nae_value;
            }
            rows.push_back(std::move(row));
          }
        }
        report["sweep"] = std::move(rows);
        break;
      }
    }
  } catch (const std::exception& e) {
    report["error"] = e.what();
    std::cerr << "error: " << e.what() << '\n';
    return finish(1);
  }
  return finish(0);
}

}  // namespace odflow
