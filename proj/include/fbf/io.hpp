#ifndef FBF_IO_HPP
#define FBF_IO_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "fbf/model.hpp"
#include "fbf/systems.hpp"

namespace fbf::io {

/// Binary artifact container: magic "FBF1", little-endian u32 format version,
/// u64 header length, UTF-8 JSON header, little-endian binary64 payload, and
/// a trailing FNV-1a-64 checksum of everything before it. Writes are
/// deterministic (sorted header keys), so identical inputs give identical
/// bytes.
struct Container {
  nlohmann::json header;
  std::vector<double> payload;
};

inline constexpr std::uint32_t kFormatVersion = 1;

void write_container(const std::string& path, const nlohmann::json& header,
                     const std::vector<double>& payload);
Container read_container(const std::string& path);

void write_dataset(const std::string& path, const Dataset& data);
Dataset read_dataset(const std::string& path);

void write_checkpoint(const std::string& path, const TrainedFilter& model);
TrainedFilter read_checkpoint(const std::string& path);

/// Posterior (or particle) draws: samples[t][k] holds the step-(k+1) draws of
/// trajectory t as rows.
struct SampleSet {
  int steps = 0;
  int n_samples = 0;
  Eigen::Index dim = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<Eigen::MatrixXd>> samples;
};

void write_samples(const std::string& path, const SampleSet& set);
SampleSet read_samples(const std::string& path);

/// %.17g: enough digits that parsing restores the exact binary64.
std::string format_double(double v);

/// Rows of preformatted cells under a header line, comma-separated.
void write_csv(const std::string& path,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows);

std::string read_text_file(const std::string& path);

}  // namespace fbf::io

#endif  // FBF_IO_HPP
