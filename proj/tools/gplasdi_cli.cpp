// SPDX-License-Identifier: Apache-2.0
//
// gplasdi generate | train | evaluate | experiment-beta3 | replay
#include <CLI11.hpp>

#include <iostream>

#include "gplasdi/commands.hpp"
#include "gplasdi/errors.hpp"

namespace {

using namespace gplasdi;

void add_train_flags(CLI::App* cmd, TrainConfig& t) {
  cmd->add_option("--beta1", t.beta1, "Reconstruction loss weight")->capture_default_str();
  cmd->add_option("--beta2", t.beta2, "Latent dynamics loss weight")->capture_default_str();
  cmd->add_option("--beta3", t.beta3, "Coefficient penalty weight")->capture_default_str();
  cmd->add_option("--epochs", t.n_epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--greedy-every", t.n_greedy, "Epochs between greedy additions")->capture_default_str();
  cmd->add_option("--lr", t.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--latent-dim", t.latent_dim, "Latent dimension")->capture_default_str();
  cmd->add_option("--hidden", t.hidden_widths, "Hidden layer widths (encoder order)")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--uq-samples", t.n_uq_samples, "Posterior draws per greedy candidate")
      ->capture_default_str();
  cmd->add_option("--initial", t.initial_samples, "Initial training grid indices (default: corners)")
      ->delimiter(',');
  cmd->add_option("--seed", t.seed, "Run seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-space dynamics reduced-order modeling of a moving-source heat problem"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolkitVersion);

  GenerateOptions gen;
  gen.threads = thread_count_from_env();
  auto* generate = app.add_subcommand("generate", "Run the full-order model over a parameter grid");
  generate->add_option("--grid-p", gen.powers, "Laser powers in W")->delimiter(',')->capture_default_str();
  generate->add_option("--grid-s", gen.speeds, "Scan speeds in m/s")->delimiter(',')->capture_default_str();
  generate->add_option("--nx", gen.fom.nx, "Grid nodes along x")->capture_default_str();
  generate->add_option("--ny", gen.fom.ny, "Grid nodes along y")->capture_default_str();
  generate->add_option("--t-end", gen.fom.t_end, "Simulated time in s")->capture_default_str();
  generate->add_option("--steps", gen.fom.n_steps_internal, "Internal solver steps")->capture_default_str();
  generate->add_option("--out", gen.out, "Output directory")->capture_default_str();
  generate->add_option("--seed", gen.seed, "Recorded seed")->capture_default_str();

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train autoencoder and latent dynamics");
  train_cmd->add_option("--data", train.data, "Dataset directory")->capture_default_str();
  train_cmd->add_option("--out", train.out, "Output directory")->capture_default_str();
  add_train_flags(train_cmd, train.train);

  EvaluateOptions eval;
  auto* evaluate = app.add_subcommand("evaluate", "Max relative error over the parameter grid");
  evaluate->add_option("--data", eval.data, "Dataset directory")->capture_default_str();
  evaluate->add_option("--model", eval.model, "Training output directory")->capture_default_str();
  evaluate->add_option("--out", eval.out, "Output directory")->capture_default_str();
  evaluate->add_option("--samples", eval.n_samples, "Rollouts per grid point (1 = mean only)")
      ->capture_default_str();
  evaluate->add_option("--seed", eval.seed, "Posterior sampling seed")->capture_default_str();

  ExperimentOptions exp;
  auto* experiment = app.add_subcommand("experiment-beta3", "Paired low/high beta3 comparison");
  experiment->add_option("--data", exp.data, "Dataset directory")->capture_default_str();
  experiment->add_option("--out", exp.out, "Output directory")->capture_default_str();
  experiment->add_option("--beta3-low", exp.beta3_low)->capture_default_str();
  experiment->add_option("--beta3-high", exp.beta3_high)->capture_default_str();
  experiment->add_option("--probe-p", exp.probe.power, "Diagnostic probe power")->capture_default_str();
  experiment->add_option("--probe-s", exp.probe.speed, "Diagnostic probe speed")->capture_default_str();
  experiment->add_option("--diagnostic-samples", exp.diagnostic_samples)->capture_default_str();
  add_train_flags(experiment, exp.train);

  std::filesystem::path replay_manifest;
  std::filesystem::path replay_out;
  auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a run.json");
  replay->add_option("manifest", replay_manifest, "run.json to replay")->required();
  replay->add_option("--out", replay_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(gen, std::cout);
    if (train_cmd->parsed()) return cmd_train(train, std::cout);
    if (evaluate->parsed()) return cmd_evaluate(eval, std::cout);
    if (experiment->parsed()) return cmd_experiment_beta3(exp, std::cout);
    if (replay->parsed()) return cmd_replay(replay_manifest, replay_out, std::cout);
  } catch (const NonFiniteLoss& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::kDivergence;
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_code::kConfig;
  } catch (const CflViolation& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_code::kConfig;
  } catch (const SourceExitsDomain& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_code::kConfig;
  } catch (const DegenerateRange& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_code::kConfig;
  } catch (const FormatError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return exit_code::kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
