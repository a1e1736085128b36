// SPDX-License-Identifier: Apache-2.0
#include "gplasdi/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "gplasdi/dataset_io.hpp"
#include "gplasdi/errors.hpp"
#include "gplasdi/rng.hpp"
#include "gplasdi/rom.hpp"

namespace gplasdi {

namespace fs = std::filesystem;
using io::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const char* reduction_name(VarianceReduction r) {
  return r == VarianceReduction::kMaxOverAll ? "max_over_all" : "max_over_time_of_spatial_mean";
}

VarianceReduction reduction_from(const std::string& s) {
  if (s == "max_over_all") return VarianceReduction::kMaxOverAll;
  if (s == "max_over_time_of_spatial_mean") return VarianceReduction::kMaxOverTimeOfSpatialMean;
  throw FormatError("unknown variance reduction '" + s + "'");
}

void write_run_manifest(const fs::path& dir, const std::string& command, const json& options,
                        const json& timings) {
  json manifest = {{"format", "gplasdi-run"},
                   {"command", command},
                   {"toolkit_version", kToolkitVersion},
                   {"options", options},
                   {"timings", timings}};
  io::write_json_atomic(dir / "run.json", manifest);
}

json generate_options_json(const GenerateOptions& o) {
  return {{"grid_p", o.powers}, {"grid_s", o.speeds}, {"fom", to_json(o.fom)},
          {"out", o.out.string()}, {"seed", o.seed}};
}

json train_options_json(const TrainOptions& o) {
  return {{"data", o.data.string()}, {"out", o.out.string()}, {"train", to_json(o.train)}};
}

json evaluate_options_json(const EvaluateOptions& o) {
  return {{"data", o.data.string()}, {"model", o.model.string()}, {"out", o.out.string()},
          {"n_samples", o.n_samples}, {"seed", o.seed}};
}

json experiment_options_json(const ExperimentOptions& o) {
  return {{"data", o.data.string()},
          {"out", o.out.string()},
          {"train", to_json(o.train)},
          {"beta3_low", o.beta3_low},
          {"beta3_high", o.beta3_high},
          {"probe", {o.probe.power, o.probe.speed}},
          {"diagnostic_samples", o.diagnostic_samples}};
}

void save_state(const fs::path& dir, const TrainState& state, const GPSurrogate& gp,
                std::span<const ParameterVector> grid, std::uint64_t seed) {
  save_model(dir, {state.mlp, state.normalization, seed, state.epoch});
  save_gp(dir, gp);
  std::vector<ParameterVector> params;
  for (std::size_t i : state.active_set) params.push_back(grid[i]);
  write_coefficients(dir / "coefficients.txt", params, state.xi_all);
  io::write_json_atomic(dir / "state.json", {{"epoch", state.epoch},
                                             {"active_set", state.active_set},
                                             {"latent_times", state.tau}});
}

std::string format_loss_line(const LossRecord& r) {
  std::ostringstream os;
  os << r.epoch << ',' << io::format_double(r.loss.ae) << ',' << io::format_double(r.loss.sindy)
     << ',' << io::format_double(r.loss.reg) << ',' << io::format_double(r.loss.total) << ','
     << r.active << '\n';
  return os.str();
}

double mean_abs_entry(std::span<const CoefficientMatrix> xi_all) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& xi : xi_all)
    for (double v : xi.xi.values()) {
      s += std::abs(v);
      ++n;
    }
  return n ? s / static_cast<double>(n) : 0.0;
}

}  // namespace

json to_json(const TrainConfig& c) {
  json gp = {{"signal_min", c.gp.signal_min}, {"signal_max", c.gp.signal_max},
             {"length_min", c.gp.length_min}, {"length_max", c.gp.length_max},
             {"noise_min", c.gp.noise_min},   {"noise_max", c.gp.noise_max},
             {"grid_points", c.gp.grid_points}, {"noise_points", c.gp.noise_points},
             {"starts", c.gp.starts},         {"final_step", c.gp.final_step}};
  gp["fixed_noise"] = c.gp.fixed_noise ? json(*c.gp.fixed_noise) : json(nullptr);
  return {{"beta1", c.beta1},
          {"beta2", c.beta2},
          {"beta3", c.beta3},
          {"lr", c.lr},
          {"n_epochs", c.n_epochs},
          {"n_greedy", c.n_greedy},
          {"initial_samples", c.initial_samples},
          {"seed", c.seed},
          {"n_uq_samples", c.n_uq_samples},
          {"hidden_widths", c.hidden_widths},
          {"latent_dim", c.latent_dim},
          {"variance_reduction", reduction_name(c.reduction)},
          {"gp", gp}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.beta1 = io::require(j, "beta1").get<double>();
  c.beta2 = io::require(j, "beta2").get<double>();
  c.beta3 = io::require(j, "beta3").get<double>();
  c.lr = io::require(j, "lr").get<double>();
  c.n_epochs = io::require(j, "n_epochs").get<long>();
  c.n_greedy = io::require(j, "n_greedy").get<long>();
  c.initial_samples = io::require(j, "initial_samples").get<std::vector<std::size_t>>();
  c.seed = io::require(j, "seed").get<std::uint64_t>();
  c.n_uq_samples = io::require(j, "n_uq_samples").get<std::size_t>();
  c.hidden_widths = io::require(j, "hidden_widths").get<std::vector<std::size_t>>();
  c.latent_dim = io::require(j, "latent_dim").get<std::size_t>();
  c.reduction = reduction_from(io::require(j, "variance_reduction").get<std::string>());
  const json& gp = io::require(j, "gp");
  c.gp.signal_min = io::require(gp, "signal_min").get<double>();
  c.gp.signal_max = io::require(gp, "signal_max").get<double>();
  c.gp.length_min = io::require(gp, "length_min").get<double>();
  c.gp.length_max = io::require(gp, "length_max").get<double>();
  c.gp.noise_min = io::require(gp, "noise_min").get<double>();
  c.gp.noise_max = io::require(gp, "noise_max").get<double>();
  c.gp.grid_points = io::require(gp, "grid_points").get<std::size_t>();
  c.gp.noise_points = io::require(gp, "noise_points").get<std::size_t>();
  c.gp.starts = io::require(gp, "starts").get<std::size_t>();
  c.gp.final_step = io::require(gp, "final_step").get<double>();
  const json& fixed = io::require(gp, "fixed_noise");
  c.gp.fixed_noise = fixed.is_null() ? std::nullopt : std::optional<double>(fixed.get<double>());
  return c;
}

std::size_t thread_count_from_env() {
  if (const char* v = std::getenv("GPLASDI_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (end != v && n > 0) return static_cast<std::size_t>(n);
  }
  return 1;
}

int cmd_generate(const GenerateOptions& o, std::ostream& log) {
  const auto start = Clock::now();
  const auto grid = make_grid(o.powers, o.speeds);
  std::vector<double> seconds;
  const SnapshotTensor data = generate_dataset(o.fom, grid, o.threads, &seconds);
  fs::create_directories(o.out);
  save_snapshots(o.out, data);
  double mean = 0.0;
  for (double s : seconds) mean += s;
  mean /= static_cast<double>(seconds.size());
  write_run_manifest(o.out, "generate", generate_options_json(o),
                     {{"total_seconds", seconds_since(start)},
                      {"fom_seconds_per_sample", seconds},
                      {"fom_seconds_mean", mean},
                      {"threads", o.threads}});
  log << "generated " << data.n_samples() << " trajectories x " << data.n_time() << " frames x "
      << data.n_nodes() << " nodes in " << o.out.string() << " (mean FOM time " << mean
      << " s/sample)\n";
  return exit_code::kOk;
}

int cmd_train(const TrainOptions& o, std::ostream& log) {
  const auto start = Clock::now();
  const SnapshotTensor data = load_snapshots(o.data);
  fs::create_directories(o.out);
  const fs::path log_path = o.out / "train_log.csv";
  std::ofstream train_log(log_path, std::ios::trunc);
  if (!train_log) throw Error("cannot open " + log_path.string());
  train_log << "epoch,l_ae,l_sindy,reg,total,active\n";

  std::size_t greedy_index = 0;
  TrainingObserver observer;
  observer.on_epoch = [&](const LossRecord& r) {
    train_log << format_loss_line(r);
    if (r.epoch % 5000 == 0) {
      log << "epoch " << r.epoch << " total " << r.loss.total << " (ae " << r.loss.ae << ", sindy "
          << r.loss.sindy << ", reg " << r.loss.reg << ") active " << r.active << '\n';
    }
  };
  observer.on_greedy = [&](const TrainState& state, const GPSurrogate& gp, std::size_t added) {
    ++greedy_index;
    char name[32];
    std::snprintf(name, sizeof name, "greedy_%02zu", greedy_index);
    train_log.flush();
    save_state(o.out / "checkpoints" / name, state, gp, data.parameters, o.train.seed);
    log << "greedy: added grid point " << added << " (P=" << data.parameters[added].power
        << " W, S=" << data.parameters[added].speed << " m/s) at epoch " << state.epoch << '\n';
  };

  TrainingResult result;
  try {
    result = run_training(data, o.train, observer);
  } catch (const NonFiniteLoss& e) {
    train_log.flush();
    io::write_json_atomic(o.out / "divergence.json", {{"epoch", e.epoch},
                                                       {"l_ae", std::to_string(e.ae)},
                                                       {"l_sindy", std::to_string(e.sindy)},
                                                       {"reg", std::to_string(e.reg)},
                                                       {"total", std::to_string(e.total)}});
    log << "training diverged: " << e.what() << '\n';
    write_run_manifest(o.out, "train", train_options_json(o),
                       {{"total_seconds", seconds_since(start)}, {"status", "diverged"}});
    return exit_code::kDivergence;
  }
  train_log.close();
  save_state(o.out / "final", result.state, result.gp, data.parameters, o.train.seed);
  write_run_manifest(o.out, "train", train_options_json(o),
                     {{"total_seconds", seconds_since(start)}, {"status", "ok"}});
  log << "trained " << result.state.epoch << " epochs; final active set size "
      << result.state.active_set.size() << "; mean |Xi| " << mean_abs_entry(result.state.xi_all)
      << '\n';
  return exit_code::kOk;
}

int cmd_evaluate(const EvaluateOptions& o, std::ostream& log, EvaluationSummary* out_summary) {
  const auto start = Clock::now();
  const SnapshotTensor data = load_snapshots(o.data);
  const fs::path final_dir = o.model / "final";
  const ModelCheckpoint ck = load_model(final_dir);
  const GPSurrogate gp = load_gp(final_dir);
  const json state = io::read_json(final_dir / "state.json");
  const auto active = io::require(state, "active_set").get<std::vector<std::size_t>>();
  const auto tau = io::require(state, "latent_times").get<std::vector<double>>();
  std::vector<CoefficientMatrix> xi_all;
  for (auto& [mu, xi] : read_coefficients(final_dir / "coefficients.txt")) xi_all.push_back(xi);

  EvaluationSummary summary;
  summary.mean_abs_xi = mean_abs_entry(xi_all);
  const RomModel model{ck.params, ck.normalization, gp};
  double rom_total = 0.0;
  for (std::size_t i = 0; i < data.n_samples(); ++i) {
    GridEvaluation g;
    g.mu = data.parameters[i];
    g.training = std::find(active.begin(), active.end(), i) != active.end();
    const RomPrediction p = predict(model, g.mu, data.values[i].row(0), tau, o.n_samples,
                                    stream_seed(o.seed, "evaluate/" + std::to_string(i)));
    g.wall_time = p.wall_time;
    rom_total += p.wall_time;
    g.n_blow_up = p.n_blow_up();
    g.blow_up = p.blow_up.front() || p.n_valid == 0;
    g.error = g.blow_up ? std::numeric_limits<double>::infinity()
                        : max_relative_error(p.mean_trajectory, data.values[i]);
    if (g.blow_up) ++summary.n_blow_up;
    if (g.error > 1.0) ++summary.n_over_100_percent;
    if (g.training) {
      summary.worst_train_error = std::max(summary.worst_train_error, g.error);
    } else {
      summary.worst_test_error = std::max(summary.worst_test_error, g.error);
    }
    summary.grid.push_back(g);
  }
  summary.rom_seconds = rom_total / static_cast<double>(data.n_samples());

  // FOM reference time: recorded at generation, else measured here on one sample.
  double fom_seconds = 0.0;
  const fs::path data_run = o.data / "run.json";
  if (fs::exists(data_run)) {
    const json run = io::read_json(data_run);
    if (run.contains("timings") && run["timings"].contains("fom_seconds_mean")) {
      fom_seconds = run["timings"]["fom_seconds_mean"].get<double>();
    }
  }
  if (!(fom_seconds > 0.0)) {
    const auto t0 = Clock::now();
    simulate(data.config, data.parameters.front());
    fom_seconds = seconds_since(t0);
  }
  summary.fom_seconds = fom_seconds;

  fs::create_directories(o.out);
  std::ostringstream csv;
  csv << "index,power,speed,is_training,status,max_relative_error,n_blow_up_rollouts\n";
  json grid = json::array();
  for (std::size_t i = 0; i < summary.grid.size(); ++i) {
    const GridEvaluation& g = summary.grid[i];
    const char* status = g.blow_up ? "BlowUp" : (g.error > 1.0 ? "ErrorOver100Percent" : "ok");
    csv << i << ',' << io::format_double(g.mu.power) << ',' << io::format_double(g.mu.speed) << ','
        << (g.training ? 1 : 0) << ',' << status << ','
        << (g.blow_up ? std::string("inf") : io::format_double(g.error)) << ',' << g.n_blow_up
        << '\n';
  }
  io::write_text_atomic(o.out / "error_grid.csv", csv.str());
  auto finite_or_string = [](double v) { return std::isfinite(v) ? json(v) : json("inf"); };
  io::write_json_atomic(o.out / "report.json",
                        {{"worst_test_error", finite_or_string(summary.worst_test_error)},
                         {"worst_train_error", finite_or_string(summary.worst_train_error)},
                         {"n_blow_up", summary.n_blow_up},
                         {"n_error_over_100_percent", summary.n_over_100_percent},
                         {"mean_abs_xi", summary.mean_abs_xi},
                         {"n_training_samples", active.size()},
                         {"n_grid_points", data.n_samples()},
                         {"rollouts_per_point", o.n_samples}});
  io::write_json_atomic(o.out / "timing.json",
                        {{"rom_prediction_seconds_mean", summary.rom_seconds},
                         {"fom_simulation_seconds", summary.fom_seconds},
                         {"speedup", summary.speedup()}});
  write_run_manifest(o.out, "evaluate", evaluate_options_json(o),
                     {{"total_seconds", seconds_since(start)},
                      {"rom_prediction_seconds_mean", summary.rom_seconds},
                      {"fom_simulation_seconds", summary.fom_seconds}});

  log << "worst-case test error " << summary.worst_test_error << ", worst training error "
      << summary.worst_train_error << ", blow-ups " << summary.n_blow_up << '\n';
  log << "ROM prediction " << summary.rom_seconds * 1e3 << " ms, FOM simulation "
      << summary.fom_seconds * 1e3 << " ms, speed-up " << summary.speedup() << "x\n";
  if (out_summary) *out_summary = summary;
  return summary.n_blow_up > 0 ? exit_code::kBlowUp : exit_code::kOk;
}

int cmd_experiment_beta3(const ExperimentOptions& o, std::ostream& log) {
  const auto start = Clock::now();
  const SnapshotTensor data = load_snapshots(o.data);
  std::size_t probe_index = data.n_samples();
  for (std::size_t i = 0; i < data.n_samples(); ++i)
    if (data.parameters[i] == o.probe) probe_index = i;
  if (probe_index == data.n_samples()) {
    throw InvalidArgument("experiment-beta3: probe parameter is not on the dataset grid");
  }

  json runs = json::array();
  std::vector<EvaluationSummary> summaries;
  for (double beta3 : {o.beta3_low, o.beta3_high}) {
    const std::string tag = "beta3_" + io::format_double(beta3);
    const fs::path dir = o.out / tag;
    TrainOptions t{o.data, dir / "train", o.train};
    t.train.beta3 = beta3;
    log << "== " << tag << ": training\n";
    const int train_rc = cmd_train(t, log);
    if (train_rc != exit_code::kOk) return train_rc;

    log << "== " << tag << ": evaluating\n";
    EvaluationSummary summary;
    EvaluateOptions e{o.data, t.out, dir / "eval", 1, o.train.seed};
    const int eval_rc = cmd_evaluate(e, log, &summary);
    if (eval_rc != exit_code::kOk && eval_rc != exit_code::kBlowUp) return eval_rc;

    // Probe diagnostics.
    const fs::path final_dir = t.out / "final";
    const ModelCheckpoint ck = load_model(final_dir);
    const GPSurrogate gp = load_gp(final_dir);
    const auto tau = io::require(io::read_json(final_dir / "state.json"), "latent_times")
                         .get<std::vector<double>>();
    const RomPrediction p =
        predict({ck.params, ck.normalization, gp}, o.probe, data.values[probe_index].row(0), tau,
                o.diagnostic_samples, stream_seed(o.train.seed, "experiment/probe"));
    export_diagnostics(dir / "diagnostics", p, data.values[probe_index], ck.params,
                       ck.normalization);

    auto finite_or_string = [](double v) { return std::isfinite(v) ? json(v) : json("inf"); };
    runs.push_back({{"beta3", beta3},
                    {"directory", tag},
                    {"worst_test_error", finite_or_string(summary.worst_test_error)},
                    {"worst_train_error", finite_or_string(summary.worst_train_error)},
                    {"n_blow_up", summary.n_blow_up},
                    {"n_error_over_100_percent", summary.n_over_100_percent},
                    {"mean_abs_xi", summary.mean_abs_xi},
                    {"probe_rollouts_blown_up", p.n_blow_up()}});
    summaries.push_back(summary);
  }

  const EvaluationSummary& low = summaries[0];
  const EvaluationSummary& high = summaries[1];
  json report = {{"probe", {o.probe.power, o.probe.speed}},
                 {"runs", runs},
                 {"high_beta3_lower_worst_test_error",
                  high.worst_test_error < low.worst_test_error},
                 {"high_beta3_smaller_mean_abs_xi", high.mean_abs_xi < low.mean_abs_xi},
                 {"low_beta3_unstable", low.n_blow_up > 0 || low.n_over_100_percent > 0}};
  io::write_json_atomic(o.out / "report.json", report);
  write_run_manifest(o.out, "experiment-beta3", experiment_options_json(o),
                     {{"total_seconds", seconds_since(start)},
                      {"rom_prediction_seconds_mean", {low.rom_seconds, high.rom_seconds}},
                      {"fom_simulation_seconds", high.fom_seconds}});
  log << "beta3=" << o.beta3_low << ": worst test error " << low.worst_test_error << ", blow-ups "
      << low.n_blow_up << ", mean |Xi| " << low.mean_abs_xi << '\n';
  log << "beta3=" << o.beta3_high << ": worst test error " << high.worst_test_error
      << ", blow-ups " << high.n_blow_up << ", mean |Xi| " << high.mean_abs_xi << '\n';
  return exit_code::kOk;
}

int cmd_replay(const fs::path& manifest_path, const fs::path& out, std::ostream& log) {
  const json m = io::read_json(manifest_path);
  const std::string command = io::require(m, "command").get<std::string>();
  const json& o = io::require(m, "options");
  if (command == "generate") {
    GenerateOptions g;
    g.powers = io::require(o, "grid_p").get<std::vector<double>>();
    g.speeds = io::require(o, "grid_s").get<std::vector<double>>();
    g.fom = fom_config_from_json(io::require(o, "fom"));
    g.seed = io::require(o, "seed").get<std::uint64_t>();
    g.threads = thread_count_from_env();
    g.out = out;
    return cmd_generate(g, log);
  }
  if (command == "train") {
    TrainOptions t;
    t.data = io::require(o, "data").get<std::string>();
    t.train = train_config_from_json(io::require(o, "train"));
    t.out = out;
    return cmd_train(t, log);
  }
  if (command == "evaluate") {
    EvaluateOptions e;
    e.data = io::require(o, "data").get<std::string>();
    e.model = io::require(o, "model").get<std::string>();
    e.n_samples = io::require(o, "n_samples").get<std::size_t>();
    e.seed = io::require(o, "seed").get<std::uint64_t>();
    e.out = out;
    return cmd_evaluate(e, log);
  }
  if (command == "experiment-beta3") {
    ExperimentOptions x;
    x.data = io::require(o, "data").get<std::string>();
    x.train = train_config_from_json(io::require(o, "train"));
    x.beta3_low = io::require(o, "beta3_low").get<double>();
    x.beta3_high = io::require(o, "beta3_high").get<double>();
    const auto probe = io::require(o, "probe").get<std::vector<double>>();
    x.probe = {probe.at(0), probe.at(1)};
    x.diagnostic_samples = io::require(o, "diagnostic_samples").get<std::size_t>();
    x.out = out;
    return cmd_experiment_beta3(x, log);
  }
  throw FormatError("replay: unknown command '" + command + "'");
}

}  // namespace gplasdi
