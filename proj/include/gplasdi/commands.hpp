// SPDX-License-Identifier: Apache-2.0
//
// The four pipeline commands behind the CLI. Each writes its artifacts plus a
// run.json manifest into its output directory and returns a process exit code.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "gplasdi/fom.hpp"
#include "gplasdi/io.hpp"
#include "gplasdi/trainer.hpp"

namespace gplasdi {

inline constexpr const char* kToolkitVersion = "1.0.0";

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kConfig = 2;
inline constexpr int kDivergence = 3;
inline constexpr int kBlowUp = 4;
}  // namespace exit_code

struct GenerateOptions {
  std::vector<double> powers{120, 130, 140, 150, 160};
  std::vector<double> speeds{0.08, 0.09, 0.10, 0.11, 0.12};
  FomConfig fom;
  std::filesystem::path out = "data";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct TrainOptions {
  std::filesystem::path data = "data";
  std::filesystem::path out = "train";
  TrainConfig train;
};

struct EvaluateOptions {
  std::filesystem::path data = "data";
  std::filesystem::path model = "train";
  std::filesystem::path out = "eval";
  std::size_t n_samples = 1;  ///< rollouts per grid point; 1 = posterior-mean path
  std::uint64_t seed = 0;
};

struct ExperimentOptions {
  std::filesystem::path data = "data";
  std::filesystem::path out = "experiment";
  TrainConfig train;
  double beta3_low = 1e-3;
  double beta3_high = 10.0;
  ParameterVector probe{140.0, 0.10};
  std::size_t diagnostic_samples = 10;
};

struct GridEvaluation {
  ParameterVector mu;
  bool training = false;
  bool blow_up = false;
  double error = 0.0;  ///< +inf when the mean rollout blew up
  std::size_t n_blow_up = 0;
  double wall_time = 0.0;
};

struct EvaluationSummary {
  std::vector<GridEvaluation> grid;
  double worst_test_error = 0.0;
  double worst_train_error = 0.0;
  std::size_t n_blow_up = 0;
  std::size_t n_over_100_percent = 0;
  double mean_abs_xi = 0.0;
  double rom_seconds = 0.0;  ///< mean ROM prediction wall time
  double fom_seconds = 0.0;  ///< mean FOM simulation wall time
  double speedup() const { return rom_seconds > 0 ? fom_seconds / rom_seconds : 0.0; }
};

int cmd_generate(const GenerateOptions& options, std::ostream& log);
int cmd_train(const TrainOptions& options, std::ostream& log);
int cmd_evaluate(const EvaluateOptions& options, std::ostream& log,
                 EvaluationSummary* summary = nullptr);
int cmd_experiment_beta3(const ExperimentOptions& options, std::ostream& log);

/// Re-executes the command recorded in a run.json, writing into `out`.
int cmd_replay(const std::filesystem::path& manifest, const std::filesystem::path& out,
               std::ostream& log);

io::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const io::json& j);

/// GPLASDI_THREADS, defaulting to 1.
std::size_t thread_count_from_env();

}  // namespace gplasdi
