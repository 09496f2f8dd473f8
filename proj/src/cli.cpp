#include "fbf/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include <CLI11.hpp>

#include "fbf/baselines.hpp"

namespace fbf::cli {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Runs fn(0..n-1) on up to `jobs` threads; the first exception wins and is
/// rethrown after all threads join. Results must be written to preallocated
/// per-index slots so the schedule cannot affect output.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(jobs));
  for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<Eigen::VectorXd> measurement_rows(
    const Dataset::Trajectory& traj) {
  std::vector<Eigen::VectorXd> ys;
  ys.reserve(static_cast<std::size_t>(traj.measurements.rows()));
  for (Eigen::Index k = 0; k < traj.measurements.rows(); ++k) {
    ys.push_back(traj.measurements.row(k).transpose());
  }
  return ys;
}

void check_dims(const TrainedFilter& model, const Dataset& data) {
  if (data.state_dim != model.config.state_dim ||
      data.meas_dim != model.config.meas_dim) {
    throw ConfigError("dataset dims (" + std::to_string(data.state_dim) +
                      ", " + std::to_string(data.meas_dim) +
                      ") do not match the checkpoint (" +
                      std::to_string(model.config.state_dim) + ", " +
                      std::to_string(model.config.meas_dim) + ")");
  }
}

void write_loss_csv(const std::string& path,
                    const std::vector<double>& history,
                    const TrainConfig& training) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(history.size());
  for (std::size_t i = 0; i < history.size(); ++i) {
    rows.push_back({std::to_string(i), io::format_double(history[i]),
                    io::format_double(lr_schedule(static_cast<int>(i),
                                                  training.lr0, training.decay,
                                                  training.iterations))});
  }
  io::write_csv(path, {"iteration", "objective", "lr"}, rows);
}

struct FilterStage {
  std::vector<FilterRun> runs;
  io::SampleSet samples;
  double seconds = 0.0;
};

FilterStage run_filter_stage(const TrainedFilter& model, const Dataset& data,
                             int n_samples, std::uint64_t root,
                             UpdateForm form, int jobs) {
  const auto n_traj = static_cast<int>(data.trajectories.size());
  FilterStage stage;
  stage.runs.resize(static_cast<std::size_t>(n_traj));
  stage.samples.steps = data.steps;
  stage.samples.n_samples = n_samples;
  stage.samples.dim = data.state_dim;
  stage.samples.seed = root;
  stage.samples.samples.resize(static_cast<std::size_t>(n_traj));

  const auto start = Clock::now();
  parallel_for(n_traj, jobs, [&](int t) {
    const auto ti = static_cast<std::size_t>(t);
    stage.runs[ti] = fbf_filter(model, measurement_rows(data.trajectories[ti]),
                                form);
    RandomStream rng(derive_seed(root, "posterior",
                                 static_cast<std::uint64_t>(t)));
    auto& per_step = stage.samples.samples[ti];
    per_step.reserve(stage.runs[ti].beliefs.size());
    for (const auto& belief : stage.runs[ti].beliefs) {
      per_step.push_back(sample_posterior(model, belief, n_samples, rng));
    }
  });
  stage.seconds = elapsed_seconds(start);
  return stage;
}

struct PfStage {
  std::vector<ParticleFilterResult> results;
  io::SampleSet samples;
  double seconds = 0.0;
};

PfStage run_pf_stage(const Dataset& data, int particles, int n_samples,
                     std::uint64_t root, int jobs) {
  const SsmInterface ssm = make_ssm_interface(data.system, data.params);
  if (ssm.state_dim != data.state_dim) {
    throw ConfigError("system interface dim does not match dataset");
  }
  const auto n_traj = static_cast<int>(data.trajectories.size());
  PfStage stage;
  stage.results.resize(static_cast<std::size_t>(n_traj));
  stage.samples.steps = data.steps;
  stage.samples.n_samples = n_samples;
  stage.samples.dim = data.state_dim;
  stage.samples.seed = root;
  stage.samples.samples.resize(static_cast<std::size_t>(n_traj));

  const auto start = Clock::now();
  parallel_for(n_traj, jobs, [&](int t) {
    const auto ti = static_cast<std::size_t>(t);
    stage.results[ti] =
        pf_filter(ssm, measurement_rows(data.trajectories[ti]), particles,
                  derive_seed(root, "traj", static_cast<std::uint64_t>(t)));
    RandomStream rng(derive_seed(root, "export",
                                 static_cast<std::uint64_t>(t)));
    auto& per_step = stage.samples.samples[ti];
    per_step.reserve(stage.results[ti].clouds.size());
    for (const auto& cloud : stage.results[ti].clouds) {
      per_step.push_back(cloud_resample(cloud, n_samples, rng));
    }
  });
  stage.seconds = elapsed_seconds(start);
  return stage;
}

void write_beliefs_csv(const std::string& path,
                       const std::vector<FilterRun>& runs, Eigen::Index m) {
  std::vector<std::string> columns = {"trajectory", "step"};
  for (Eigen::Index i = 0; i < m; ++i) {
    columns.push_back("mu" + std::to_string(i));
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    columns.push_back("var" + std::to_string(i));
  }
  std::vector<std::vector<std::string>> rows;
  auto emit = [&](std::size_t traj, int step, const GaussianBelief& belief) {
    std::vector<std::string> row = {std::to_string(traj),
                                    std::to_string(step)};
    for (Eigen::Index i = 0; i < m; ++i) {
      row.push_back(io::format_double(belief.mean[i]));
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      row.push_back(io::format_double(belief.cov(i, i)));
    }
    rows.push_back(std::move(row));
  };
  for (std::size_t t = 0; t < runs.size(); ++t) {
    emit(t, 0, runs[t].initial);
    for (std::size_t k = 0; k < runs[t].beliefs.size(); ++k) {
      emit(t, static_cast<int>(k) + 1, runs[t].beliefs[k]);
    }
  }
  io::write_csv(path, columns, rows);
}

void write_cloud_csv(const std::string& path,
                     const std::vector<ParticleFilterResult>& results,
                     Eigen::Index m) {
  std::vector<std::string> columns = {"trajectory", "step", "ess",
                                      "resampled", "degenerate_reset"};
  for (Eigen::Index i = 0; i < m; ++i) {
    columns.push_back("mean" + std::to_string(i));
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    columns.push_back("std" + std::to_string(i));
  }
  std::vector<std::vector<std::string>> rows;
  for (std::size_t t = 0; t < results.size(); ++t) {
    for (std::size_t k = 0; k < results[t].clouds.size(); ++k) {
      const ParticleCloud& cloud = results[t].clouds[k];
      const Eigen::VectorXd mean = cloud_mean(cloud);
      std::vector<std::string> row = {
          std::to_string(t), std::to_string(k + 1),
          io::format_double(cloud.ess), cloud.resampled ? "1" : "0",
          cloud.degenerate_reset ? "1" : "0"};
      for (Eigen::Index i = 0; i < m; ++i) {
        row.push_back(io::format_double(mean[i]));
      }
      for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::ArrayXd centered =
            cloud.particles.col(i).array() - mean[i];
        const double var =
            (cloud.weights.array() * centered.square()).sum();
        row.push_back(io::format_double(std::sqrt(std::max(var, 0.0))));
      }
      rows.push_back(std::move(row));
    }
  }
  io::write_csv(path, columns, rows);
}

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;
};

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate out;
  const auto n = static_cast<double>(values.size());
  for (const double v : values) out.mean += v;
  out.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (const double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

}  // namespace

Dataset generate_dataset(const SystemConfig& system, int n_traj,
                         std::uint64_t dataset_seed) {
  if (n_traj < 1) throw ConfigError("trajectory count must be >= 1");
  const auto& p = system.params;
  if (system.id == "sinusoidal") {
    return simulate_sinusoidal(p.at("q2"), p.at("r2"), system.steps, n_traj,
                               dataset_seed);
  }
  if (system.id == "lorenz96") {
    return simulate_lorenz96(static_cast<Eigen::Index>(p.at("m")),
                             p.at("forcing"), p.at("dt"), system.steps,
                             n_traj, dataset_seed);
  }
  if (system.id == "advection_diffusion") {
    return simulate_advdiff(p.at("kappa"), p.at("dc"), p.at("sigma"),
                            p.at("r2"),
                            static_cast<Eigen::Index>(p.at("sensors")),
                            system.steps, n_traj, dataset_seed, p.at("dt"));
  }
  throw ConfigError("unknown system id '" + system.id + "'");
}

void cmd_generate(const GenerateOptions& options, std::ostream& log) {
  const ExperimentConfig config = load_config(options.config_path);
  const std::uint64_t root = options.seed.value_or(config.seed);
  const int n_traj = options.test_set ? config.system.test_trajectories
                                      : config.system.trajectories;
  if (n_traj < 1) {
    throw ConfigError(options.test_set
                          ? "[system] test_trajectories must be >= 1 for "
                            "--test"
                          : "[system] trajectories must be >= 1");
  }
  const std::uint64_t dataset_seed =
      derive_seed(root, options.test_set ? "dataset-test" : "dataset-train");
  const Dataset data = generate_dataset(config.system, n_traj, dataset_seed);
  io::write_dataset(options.out_path, data);
  log << "generate: system=" << data.system
      << " N=" << data.trajectories.size() << " K=" << data.steps
      << " m=" << data.state_dim << " n=" << data.meas_dim
      << " bytes=" << fs::file_size(options.out_path) << "\n";
}

void cmd_train(const TrainOptions& options, std::ostream& log) {
  const ExperimentConfig config = load_config(options.config_path);
  const Dataset data = io::read_dataset(options.data_path);
  if (data.state_dim != config.model.state_dim ||
      data.meas_dim != config.model.meas_dim) {
    throw ConfigError("dataset dims do not match the configured model");
  }
  TrainConfig training = config.training;
  training.seed = options.seed.value_or(config.seed);

  TrainedFilter model = make_initial_model(config.model, training.seed);
  const std::string loss_path = options.out_path + ".loss.csv";
  const auto start = Clock::now();
  try {
    train(model, data, training);
  } catch (const TrainingDiverged& err) {
    write_loss_csv(loss_path, err.loss_history, training);
    throw;
  }
  const double seconds = elapsed_seconds(start);
  write_loss_csv(loss_path, model.loss_history, training);
  io::write_checkpoint(options.out_path, model);
  log << "train: iterations=" << model.loss_history.size();
  if (!model.loss_history.empty()) {
    log << " final_objective="
        << io::format_double(model.loss_history.back());
  }
  log << " seconds=" << io::format_double(seconds) << "\n";
}

void cmd_filter(const FilterOptions& options, std::ostream& log) {
  if (options.n_samples < 1) throw ConfigError("--samples must be >= 1");
  const TrainedFilter model = io::read_checkpoint(options.checkpoint_path);
  const Dataset data = io::read_dataset(options.data_path);
  check_dims(model, data);
  const std::uint64_t root =
      options.seed.value_or(derive_seed(data.seed, "filter"));

  const FilterStage stage = run_filter_stage(
      model, data, options.n_samples, root, options.form, options.jobs);
  write_beliefs_csv(options.out_prefix + ".beliefs.csv", stage.runs,
                    data.state_dim);
  io::write_samples(options.out_prefix + ".samples.fbf", stage.samples);
  log << "filter: trajectories=" << stage.runs.size()
      << " steps=" << data.steps << " samples=" << options.n_samples
      << " seconds=" << io::format_double(stage.seconds) << "\n";
}

void cmd_pf(const PfOptions& options, std::ostream& log) {
  if (options.particles < 1) throw ConfigError("--particles must be >= 1");
  if (options.n_samples < 1) throw ConfigError("--samples must be >= 1");
  const Dataset data = io::read_dataset(options.data_path);
  const std::uint64_t root =
      options.seed.value_or(derive_seed(data.seed, "pf"));

  const PfStage stage = run_pf_stage(data, options.particles,
                                     options.n_samples, root, options.jobs);
  write_cloud_csv(options.out_prefix + ".cloud.csv", stage.results,
                  data.state_dim);
  io::write_samples(options.out_prefix + ".samples.fbf", stage.samples);
  log << "pf: trajectories=" << stage.results.size()
      << " particles=" << options.particles
      << " samples=" << options.n_samples
      << " seconds=" << io::format_double(stage.seconds) << "\n";
}

MetricReport cmd_evaluate(const EvaluateOptions& options, std::ostream& log) {
  const Dataset truth = io::read_dataset(options.truth_path);
  const io::SampleSet set = io::read_samples(options.samples_path);
  if (set.samples.size() != truth.trajectories.size()) {
    throw ConfigError("trajectory counts differ: truth has " +
                      std::to_string(truth.trajectories.size()) +
                      ", samples have " + std::to_string(set.samples.size()));
  }
  if (set.steps != truth.steps || set.dim != truth.state_dim) {
    throw ConfigError("sample set shape does not match the truth dataset");
  }
  bool want_rmse = false;
  bool want_mmd = false;
  bool want_crps = false;
  for (const auto& metric : options.metrics) {
    if (metric == "rmse") {
      want_rmse = true;
    } else if (metric == "mmd") {
      want_mmd = true;
    } else if (metric == "crps") {
      want_crps = true;
    } else {
      throw ConfigError("unknown metric '" + metric + "'");
    }
  }
  if (!want_rmse && !want_mmd && !want_crps) {
    throw ConfigError("empty metric list");
  }

  const auto n_traj = static_cast<int>(truth.trajectories.size());
  MetricReport report;
  report.rmse.resize(want_rmse ? n_traj : 0);
  report.mmd.resize(want_mmd ? n_traj : 0);
  report.crps.resize(want_crps ? n_traj : 0);
  parallel_for(n_traj, options.jobs, [&](int t) {
    const auto ti = static_cast<std::size_t>(t);
    const Eigen::MatrixXd states =
        truth.trajectories[ti].states.middleRows(1, truth.steps);
    if (want_rmse) report.rmse[ti] = rmse(states, set.samples[ti]);
    if (want_mmd) {
      report.mmd[ti] = mmd(states, set.samples[ti], options.mmd_sigma);
    }
    if (want_crps) report.crps[ti] = crps(states, set.samples[ti]);
  });

  nlohmann::json metrics_json = nlohmann::json::object();
  std::vector<std::string> columns = {"trajectory"};
  std::vector<std::vector<std::string>> rows(
      static_cast<std::size_t>(n_traj) + 2);
  for (int t = 0; t < n_traj; ++t) {
    rows[static_cast<std::size_t>(t)].push_back(std::to_string(t));
  }
  rows[static_cast<std::size_t>(n_traj)].push_back("mean");
  rows[static_cast<std::size_t>(n_traj) + 1].push_back("std");

  auto emit = [&](const char* name, const std::vector<double>& values,
                  double& mean_out, double& std_out) {
    const Aggregate agg = aggregate(values);
    mean_out = agg.mean;
    std_out = agg.std;
    metrics_json[name] = {{"per_trajectory", values},
                          {"mean", agg.mean},
                          {"std", agg.std}};
    columns.push_back(name);
    for (int t = 0; t < n_traj; ++t) {
      rows[static_cast<std::size_t>(t)].push_back(
          io::format_double(values[static_cast<std::size_t>(t)]));
    }
    rows[static_cast<std::size_t>(n_traj)].push_back(
        io::format_double(agg.mean));
    rows[static_cast<std::size_t>(n_traj) + 1].push_back(
        io::format_double(agg.std));
    log << "evaluate: " << name << " mean=" << io::format_double(agg.mean)
        << " std=" << io::format_double(agg.std) << "\n";
  };
  if (want_rmse) emit("rmse", report.rmse, report.rmse_mean, report.rmse_std);
  if (want_mmd) emit("mmd", report.mmd, report.mmd_mean, report.mmd_std);
  if (want_crps) emit("crps", report.crps, report.crps_mean, report.crps_std);

  const nlohmann::json doc = {
      {"kind", "metrics"},
      {"version", io::kFormatVersion},
      {"trajectories", n_traj},
      {"steps", set.steps},
      {"samples", set.n_samples},
      {"mmd_sigma", options.mmd_sigma},
      {"metrics", metrics_json},
  };
  std::ofstream json_out(options.out_prefix + ".metrics.json",
                         std::ios::trunc);
  if (!json_out) {
    throw IoError(options.out_prefix + ".metrics.json: cannot open");
  }
  json_out << doc.dump(2) << "\n";
  if (!json_out) {
    throw IoError(options.out_prefix + ".metrics.json: write failed");
  }
  io::write_csv(options.out_prefix + ".metrics.csv", columns, rows);
  return report;
}

void cmd_compare(const CompareOptions& options, std::ostream& log) {
  const ExperimentConfig config = load_config(options.config_path);
  const std::uint64_t root = options.seed.value_or(config.seed);
  if (config.system.test_trajectories < 1) {
    throw ConfigError("[system] test_trajectories must be >= 1 for compare");
  }
  fs::create_directories(options.out_dir);
  const auto path_in_dir = [&](const std::string& name) {
    return (fs::path(options.out_dir) / name).string();
  };

  const Dataset train_data =
      generate_dataset(config.system, config.system.trajectories,
                       derive_seed(root, "dataset-train"));
  io::write_dataset(path_in_dir("train.fbf"), train_data);
  const Dataset test_data =
      generate_dataset(config.system, config.system.test_trajectories,
                       derive_seed(root, "dataset-test"));
  io::write_dataset(path_in_dir("test.fbf"), test_data);
  log << "compare: train N=" << train_data.trajectories.size()
      << " test N=" << test_data.trajectories.size()
      << " K=" << config.system.steps << "\n";

  const bool want_rmse =
      std::count(config.evaluation.metrics.begin(),
                 config.evaluation.metrics.end(), "rmse") > 0;
  const bool want_mmd = std::count(config.evaluation.metrics.begin(),
                                   config.evaluation.metrics.end(),
                                   "mmd") > 0;
  const bool want_crps = std::count(config.evaluation.metrics.begin(),
                                    config.evaluation.metrics.end(),
                                    "crps") > 0;

  std::vector<std::string> columns = {"method"};
  for (const char* name : {"rmse", "mmd", "crps"}) {
    columns.push_back(std::string(name) + "_mean");
    columns.push_back(std::string(name) + "_std");
  }
  columns.push_back("offline_seconds");
  columns.push_back("online_seconds");
  std::vector<std::vector<std::string>> table;

  auto metric_cells = [&](const MetricReport& report) {
    std::vector<std::string> cells;
    const auto push = [&](bool want, double mean, double sd) {
      cells.push_back(want ? io::format_double(mean) : "na");
      cells.push_back(want ? io::format_double(sd) : "na");
    };
    push(want_rmse, report.rmse_mean, report.rmse_std);
    push(want_mmd, report.mmd_mean, report.mmd_std);
    push(want_crps, report.crps_mean, report.crps_std);
    return cells;
  };

  auto evaluate_samples = [&](const std::string& label) {
    EvaluateOptions eval;
    eval.truth_path = path_in_dir("test.fbf");
    eval.samples_path = path_in_dir(label + ".samples.fbf");
    eval.out_prefix = path_in_dir(label);
    eval.metrics = config.evaluation.metrics;
    eval.mmd_sigma = config.evaluation.mmd_sigma;
    eval.jobs = options.jobs;
    return cmd_evaluate(eval, log);
  };

  for (const Variant variant : {Variant::kFbf, Variant::kFbfPrime}) {
    const std::string label = variant == Variant::kFbf ? "fbf" : "fbf_prime";
    ModelConfig model_config = config.model;
    model_config.variant = variant;
    TrainConfig training = config.training;
    training.seed = root;

    log << "compare: training " << label << "\n";
    auto start = Clock::now();
    TrainedFilter model;
    try {
      model = train_model(model_config, train_data, training);
    } catch (const TrainingDiverged& err) {
      write_loss_csv(path_in_dir(label + ".loss.csv"), err.loss_history,
                     training);
      throw NumericError(label + ": " + err.what());
    }
    const double offline = elapsed_seconds(start);
    write_loss_csv(path_in_dir(label + ".loss.csv"), model.loss_history,
                   training);
    io::write_checkpoint(path_in_dir(label + ".ckpt.fbf"), model);

    start = Clock::now();
    const FilterStage stage = run_filter_stage(
        model, test_data, config.evaluation.n_samples,
        derive_seed(root, label + "-filter"), UpdateForm::kExact,
        options.jobs);
    io::write_samples(path_in_dir(label + ".samples.fbf"), stage.samples);
    const double online = elapsed_seconds(start);
    write_beliefs_csv(path_in_dir(label + ".beliefs.csv"), stage.runs,
                      test_data.state_dim);

    const MetricReport report = evaluate_samples(label);
    std::vector<std::string> row = {label};
    for (auto& cell : metric_cells(report)) row.push_back(cell);
    row.push_back(io::format_double(offline));
    row.push_back(io::format_double(online));
    table.push_back(std::move(row));
  }

  {
    log << "compare: running pf\n";
    const auto start = Clock::now();
    const PfStage stage = run_pf_stage(
        test_data, config.evaluation.pf_particles,
        config.evaluation.n_samples, derive_seed(root, "pf-filter"),
        options.jobs);
    io::write_samples(path_in_dir("pf.samples.fbf"), stage.samples);
    const double online = elapsed_seconds(start);
    write_cloud_csv(path_in_dir("pf.cloud.csv"), stage.results,
                    test_data.state_dim);

    const MetricReport report = evaluate_samples("pf");
    std::vector<std::string> row = {"pf"};
    for (auto& cell : metric_cells(report)) row.push_back(cell);
    row.push_back("na");
    row.push_back(io::format_double(online));
    table.push_back(std::move(row));
  }

  io::write_csv(path_in_dir("compare.csv"), columns, table);
  for (std::size_t c = 0; c < columns.size(); ++c) {
    log << (c == 0 ? "compare: " : ",") << columns[c];
  }
  log << "\n";
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      log << (c == 0 ? "compare: " : ",") << row[c];
    }
    log << "\n";
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& log,
            std::ostream& err) {
  CLI::App app{"Flow-based Bayesian filtering toolkit"};
  app.require_subcommand(1);

  GenerateOptions generate;
  CLI::App* cmd_gen = app.add_subcommand(
      "generate", "Simulate a system and write a dataset file");
  cmd_gen->add_option("--config", generate.config_path, "Experiment config")
      ->required();
  cmd_gen->add_option("--out", generate.out_path, "Output dataset path")
      ->required();
  cmd_gen->add_flag("--test", generate.test_set,
                    "Use the test-set size and seed label");
  cmd_gen->add_option("--seed", generate.seed, "Override the root seed");

  TrainOptions train_opts;
  CLI::App* cmd_tr =
      app.add_subcommand("train", "Fit a model and write a checkpoint");
  cmd_tr->add_option("--config", train_opts.config_path, "Experiment config")
      ->required();
  cmd_tr->add_option("--data", train_opts.data_path, "Training dataset")
      ->required();
  cmd_tr->add_option("--out", train_opts.out_path, "Output checkpoint path")
      ->required();
  cmd_tr->add_option("--seed", train_opts.seed, "Override the root seed");

  FilterOptions filter_opts;
  CLI::App* cmd_fl = app.add_subcommand(
      "filter", "Run the learned filter over a dataset");
  cmd_fl->add_option("--checkpoint", filter_opts.checkpoint_path,
                     "Trained checkpoint")
      ->required();
  cmd_fl->add_option("--data", filter_opts.data_path, "Dataset to filter")
      ->required();
  cmd_fl->add_option("--out", filter_opts.out_prefix, "Output path prefix")
      ->required();
  cmd_fl->add_option("--samples", filter_opts.n_samples,
                     "Posterior draws per step");
  cmd_fl->add_option("--seed", filter_opts.seed, "Sampling seed");
  cmd_fl->add_option("--jobs", filter_opts.jobs, "Worker threads");
  cmd_fl
      ->add_option("--update-form", filter_opts.form,
                   "Measurement update form")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, UpdateForm>{
              {"exact", UpdateForm::kExact},
              {"as-printed", UpdateForm::kAsPrinted}},
          CLI::ignore_case));

  PfOptions pf_opts;
  CLI::App* cmd_p = app.add_subcommand(
      "pf", "Run the bootstrap particle filter over a dataset");
  cmd_p->add_option("--data", pf_opts.data_path, "Dataset to filter")
      ->required();
  cmd_p->add_option("--out", pf_opts.out_prefix, "Output path prefix")
      ->required();
  cmd_p->add_option("--particles", pf_opts.particles, "Particle count");
  cmd_p->add_option("--samples", pf_opts.n_samples,
                    "Equally weighted draws per step");
  cmd_p->add_option("--seed", pf_opts.seed, "Filter seed");
  cmd_p->add_option("--jobs", pf_opts.jobs, "Worker threads");

  EvaluateOptions eval_opts;
  CLI::App* cmd_ev = app.add_subcommand(
      "evaluate", "Score a sample file against a truth dataset");
  cmd_ev->add_option("--truth", eval_opts.truth_path, "Truth dataset")
      ->required();
  cmd_ev->add_option("--samples", eval_opts.samples_path, "Sample file")
      ->required();
  cmd_ev->add_option("--out", eval_opts.out_prefix, "Output path prefix")
      ->required();
  cmd_ev
      ->add_option("--metrics", eval_opts.metrics,
                   "Metrics to compute (rmse, mmd, crps)")
      ->delimiter(',');
  cmd_ev->add_option("--mmd-sigma", eval_opts.mmd_sigma, "Kernel bandwidth");
  cmd_ev->add_option("--jobs", eval_opts.jobs, "Worker threads");

  CompareOptions compare_opts;
  CLI::App* cmd_cmp = app.add_subcommand(
      "compare", "Train and score both model variants plus the pf baseline");
  cmd_cmp->add_option("--config", compare_opts.config_path,
                      "Experiment config")
      ->required();
  cmd_cmp->add_option("--out", compare_opts.out_dir, "Output directory")
      ->required();
  cmd_cmp->add_option("--seed", compare_opts.seed, "Override the root seed");
  cmd_cmp->add_option("--jobs", compare_opts.jobs, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& parse_err) {
    const int code = app.exit(parse_err, log, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmd_gen->parsed()) {
      cmd_generate(generate, log);
    } else if (cmd_tr->parsed()) {
      cmd_train(train_opts, log);
    } else if (cmd_fl->parsed()) {
      cmd_filter(filter_opts, log);
    } else if (cmd_p->parsed()) {
      cmd_pf(pf_opts, log);
    } else if (cmd_ev->parsed()) {
      cmd_evaluate(eval_opts, log);
    } else if (cmd_cmp->parsed()) {
      cmd_compare(compare_opts, log);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return 4;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace fbf::cli
