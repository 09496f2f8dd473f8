#ifndef FBF_CLI_HPP
#define FBF_CLI_HPP

#include <iosfwd>
#include <optional>
#include <string>

#include "fbf/config.hpp"
#include "fbf/filtering.hpp"
#include "fbf/io.hpp"
#include "fbf/metrics.hpp"

namespace fbf::cli {

/// Simulates the configured system. The dataset seed is derived from the
/// experiment root, with separate labels for the training and test sets.
Dataset generate_dataset(const SystemConfig& system, int n_traj,
                         std::uint64_t dataset_seed);

struct GenerateOptions {
  std::string config_path;
  std::string out_path;
  bool test_set = false;
  std::optional<std::uint64_t> seed;  // replaces the experiment root seed
};
void cmd_generate(const GenerateOptions& options, std::ostream& log);

struct TrainOptions {
  std::string config_path;
  std::string data_path;
  std::string out_path;  // checkpoint; loss CSV lands at out_path + ".loss.csv"
  std::optional<std::uint64_t> seed;
};
void cmd_train(const TrainOptions& options, std::ostream& log);

struct FilterOptions {
  std::string checkpoint_path;
  std::string data_path;
  std::string out_prefix;  // writes <prefix>.beliefs.csv, <prefix>.samples.fbf
  int n_samples = 1000;
  std::optional<std::uint64_t> seed;  // default derives from the dataset seed
  UpdateForm form = UpdateForm::kExact;
  int jobs = 1;
};
void cmd_filter(const FilterOptions& options, std::ostream& log);

struct PfOptions {
  std::string data_path;
  std::string out_prefix;  // writes <prefix>.cloud.csv, <prefix>.samples.fbf
  int particles = 2000;
  int n_samples = 1000;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};
void cmd_pf(const PfOptions& options, std::ostream& log);

struct EvaluateOptions {
  std::string truth_path;
  std::string samples_path;
  std::string out_prefix;  // writes <prefix>.metrics.csv, <prefix>.metrics.json
  std::vector<std::string> metrics = {"rmse", "mmd", "crps"};
  double mmd_sigma = 2.0;
  int jobs = 1;
};
MetricReport cmd_evaluate(const EvaluateOptions& options, std::ostream& log);

struct CompareOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};
void cmd_compare(const CompareOptions& options, std::ostream& log);

/// Parses argv, dispatches, and maps failures to exit codes:
/// 0 success, 2 configuration, 3 numeric, 4 I/O.
int run_cli(int argc, const char* const* argv, std::ostream& log,
            std::ostream& err);

}  // namespace fbf::cli

#endif  // FBF_CLI_HPP
