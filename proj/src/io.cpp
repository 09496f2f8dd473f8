#include "fbf/io.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "fbf/errors.hpp"

namespace fbf::io {
namespace {

constexpr char kMagic[4] = {'F', 'B', 'F', '1'};

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (const char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ULL;
  }
  return hash;
}

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void append_f64(std::string& out, double v) {
  append_u64(out, std::bit_cast<std::uint64_t>(v));
}

std::uint32_t load_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i]))
         << (8 * i);
  }
  return v;
}

std::uint64_t load_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i]))
         << (8 * i);
  }
  return v;
}

double load_f64(const char* p) {
  return std::bit_cast<double>(load_u64(p));
}

nlohmann::json parse_header(const std::string& text, const std::string& path) {
  nlohmann::json header = nlohmann::json::parse(text, nullptr, false);
  if (header.is_discarded()) {
    throw IoError(path + ": malformed container header");
  }
  return header;
}

void require_kind(const nlohmann::json& header, const std::string& kind,
                  const std::string& path) {
  if (!header.contains("kind") || header.at("kind") != kind) {
    throw IoError(path + ": expected a " + kind + " file");
  }
}

void append_matrix(std::vector<double>& payload, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      payload.push_back(m(r, c));
    }
  }
}

Eigen::MatrixXd take_matrix(const std::vector<double>& payload,
                            std::size_t& pos, Eigen::Index rows,
                            Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = payload[pos++];
    }
  }
  return m;
}

nlohmann::json flow_to_json(const FlowConfig& config) {
  return {{"blocks", config.blocks},
          {"hidden_layers", config.hidden_layers},
          {"units", config.units},
          {"clamp", config.clamp}};
}

FlowConfig flow_from_json(const nlohmann::json& j, Eigen::Index dim) {
  FlowConfig config;
  config.dim = dim;
  config.blocks = j.at("blocks").get<int>();
  config.hidden_layers = j.at("hidden_layers").get<int>();
  config.units = j.at("units").get<Eigen::Index>();
  config.clamp = j.at("clamp").get<double>();
  return config;
}

}  // namespace

void write_container(const std::string& path, const nlohmann::json& header,
                     const std::vector<double>& payload) {
  const std::string header_str = header.dump();
  std::string bytes;
  bytes.reserve(16 + header_str.size() + payload.size() * 8 + 8);
  bytes.append(kMagic, 4);
  append_u32(bytes, kFormatVersion);
  append_u64(bytes, header_str.size());
  bytes += header_str;
  for (const double v : payload) append_f64(bytes, v);
  append_u64(bytes, fnv1a64(bytes));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path + ": write failed");
}

Container read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (!in.good() && !in.eof()) throw IoError(path + ": read failed");

  if (bytes.size() < 24 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError(path + ": not a container file");
  }
  if (load_u32(bytes.data() + 4) != kFormatVersion) {
    throw IoError(path + ": unsupported format version");
  }
  const std::uint64_t header_len = load_u64(bytes.data() + 8);
  const std::size_t preamble = 16 + header_len;
  if (bytes.size() < preamble + 8) {
    throw IoError(path + ": truncated container");
  }
  const std::uint64_t stored =
      load_u64(bytes.data() + (bytes.size() - 8));
  if (fnv1a64(bytes.substr(0, bytes.size() - 8)) != stored) {
    throw IoError(path + ": checksum mismatch");
  }
  const std::size_t payload_bytes = bytes.size() - preamble - 8;
  if (payload_bytes % 8 != 0) {
    throw IoError(path + ": payload length not a multiple of 8");
  }

  Container c;
  c.header = parse_header(bytes.substr(16, header_len), path);
  c.payload.resize(payload_bytes / 8);
  for (std::size_t i = 0; i < c.payload.size(); ++i) {
    c.payload[i] = load_f64(bytes.data() + preamble + i * 8);
  }
  return c;
}

void write_dataset(const std::string& path, const Dataset& data) {
  nlohmann::json header = {
      {"kind", "dataset"},
      {"version", kFormatVersion},
      {"system", data.system},
      {"params", data.params},
      {"seed", data.seed},
      {"trajectories", data.trajectories.size()},
      {"steps", data.steps},
      {"state_dim", data.state_dim},
      {"meas_dim", data.meas_dim},
  };
  std::vector<double> payload;
  const std::size_t per_traj = static_cast<std::size_t>(
      (data.steps + 1) * data.state_dim + data.steps * data.meas_dim);
  payload.reserve(per_traj * data.trajectories.size());
  for (const auto& traj : data.trajectories) {
    append_matrix(payload, traj.states);
    append_matrix(payload, traj.measurements);
  }
  write_container(path, header, payload);
}

Dataset read_dataset(const std::string& path) {
  const Container c = read_container(path);
  require_kind(c.header, "dataset", path);
  Dataset data;
  try {
    data.system = c.header.at("system").get<std::string>();
    data.params =
        c.header.at("params").get<std::map<std::string, double>>();
    data.seed = c.header.at("seed").get<std::uint64_t>();
    data.steps = c.header.at("steps").get<int>();
    data.state_dim = c.header.at("state_dim").get<Eigen::Index>();
    data.meas_dim = c.header.at("meas_dim").get<Eigen::Index>();
    const auto n_traj = c.header.at("trajectories").get<std::size_t>();
    if (data.steps < 0 || data.state_dim < 1 || data.meas_dim < 1) {
      throw IoError(path + ": invalid dataset shape");
    }
    const std::size_t per_traj = static_cast<std::size_t>(
        (data.steps + 1) * data.state_dim + data.steps * data.meas_dim);
    if (c.payload.size() != per_traj * n_traj) {
      throw IoError(path + ": payload size does not match header shape");
    }
    data.trajectories.resize(n_traj);
    std::size_t pos = 0;
    for (auto& traj : data.trajectories) {
      traj.states =
          take_matrix(c.payload, pos, data.steps + 1, data.state_dim);
      traj.measurements =
          take_matrix(c.payload, pos, data.steps, data.meas_dim);
    }
  } catch (const nlohmann::json::exception& err) {
    throw IoError(path + ": bad dataset header: " + err.what());
  }
  return data;
}

void write_checkpoint(const std::string& path, const TrainedFilter& model) {
  nlohmann::json manifest = nlohmann::json::array();
  std::vector<double> payload;
  for (const auto& slot : model.params.slots()) {
    manifest.push_back({{"name", slot.name},
                        {"shape", slot.value.shape()},
                        {"trainable", slot.trainable}});
    append_matrix(payload, slot.value.data());
  }

  const char* variant =
      model.config.variant == Variant::kFbf ? "fbf" : "fbf_prime";
  nlohmann::json config = {
      {"variant", variant},
      {"state_dim", model.config.state_dim},
      {"meas_dim", model.config.meas_dim},
      {"t_flow", flow_to_json(model.config.t_flow)},
      {"v_flow", flow_to_json(model.config.v_flow)},
      {"conditioner",
       {{"hidden_layers", model.config.conditioner.hidden_layers},
        {"units", model.config.conditioner.units}}},
  };

  std::vector<double> sigma0_flat;
  sigma0_flat.reserve(
      static_cast<std::size_t>(model.sigma0.rows() * model.sigma0.cols()));
  for (Eigen::Index r = 0; r < model.sigma0.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.sigma0.cols(); ++c) {
      sigma0_flat.push_back(model.sigma0(r, c));
    }
  }

  nlohmann::json header = {
      {"kind", "checkpoint"},
      {"version", kFormatVersion},
      {"config", config},
      {"manifest", manifest},
      {"mu0", std::vector<double>(model.mu0.data(),
                                  model.mu0.data() + model.mu0.size())},
      {"sigma0", sigma0_flat},
      {"loss_history", model.loss_history},
  };
  write_container(path, header, payload);
}

TrainedFilter read_checkpoint(const std::string& path) {
  const Container c = read_container(path);
  require_kind(c.header, "checkpoint", path);
  TrainedFilter model;
  try {
    const nlohmann::json& config = c.header.at("config");
    const std::string variant = config.at("variant").get<std::string>();
    if (variant == "fbf") {
      model.config.variant = Variant::kFbf;
    } else if (variant == "fbf_prime") {
      model.config.variant = Variant::kFbfPrime;
    } else {
      throw IoError(path + ": unknown variant " + variant);
    }
    model.config.state_dim = config.at("state_dim").get<Eigen::Index>();
    model.config.meas_dim = config.at("meas_dim").get<Eigen::Index>();
    model.config.t_flow =
        flow_from_json(config.at("t_flow"), model.config.state_dim);
    model.config.v_flow =
        flow_from_json(config.at("v_flow"), model.config.meas_dim);
    model.config.conditioner.hidden_layers =
        config.at("conditioner").at("hidden_layers").get<int>();
    model.config.conditioner.units =
        config.at("conditioner").at("units").get<Eigen::Index>();

    std::size_t pos = 0;
    for (const auto& entry : c.header.at("manifest")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
      const bool trainable = entry.at("trainable").get<bool>();
      ad::Tensor value = ad::Tensor::zeros(shape);
      const std::size_t count = static_cast<std::size_t>(value.size());
      if (pos + count > c.payload.size()) {
        throw IoError(path + ": parameter payload shorter than manifest");
      }
      value = ad::Tensor::with_shape(
          shape, take_matrix(c.payload, pos, value.data().rows(),
                             value.data().cols()));
      model.params.add(name, std::move(value), trainable);
    }
    if (pos != c.payload.size()) {
      throw IoError(path + ": parameter payload longer than manifest");
    }

    const auto mu0 = c.header.at("mu0").get<std::vector<double>>();
    model.mu0 = Eigen::Map<const Eigen::VectorXd>(
        mu0.data(), static_cast<Eigen::Index>(mu0.size()));
    const auto sigma0 = c.header.at("sigma0").get<std::vector<double>>();
    const auto m = static_cast<std::size_t>(model.config.state_dim);
    if (mu0.size() != m || sigma0.size() != m * m) {
      throw IoError(path + ": initial belief shape mismatch");
    }
    model.sigma0.resize(model.config.state_dim, model.config.state_dim);
    for (Eigen::Index r = 0; r < model.config.state_dim; ++r) {
      for (Eigen::Index col = 0; col < model.config.state_dim; ++col) {
        model.sigma0(r, col) =
            sigma0[static_cast<std::size_t>(r * model.config.state_dim + col)];
      }
    }
    model.loss_history =
        c.header.at("loss_history").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& err) {
    throw IoError(path + ": bad checkpoint header: " + err.what());
  }
  bind_handles(model);
  return model;
}

void write_samples(const std::string& path, const SampleSet& set) {
  nlohmann::json header = {
      {"kind", "samples"},    {"version", kFormatVersion},
      {"trajectories", set.samples.size()}, {"steps", set.steps},
      {"samples", set.n_samples},           {"dim", set.dim},
      {"seed", set.seed},
  };
  std::vector<double> payload;
  payload.reserve(set.samples.size() * static_cast<std::size_t>(set.steps) *
                  static_cast<std::size_t>(set.n_samples) *
                  static_cast<std::size_t>(set.dim));
  for (const auto& traj : set.samples) {
    if (traj.size() != static_cast<std::size_t>(set.steps)) {
      throw ConfigError("sample set: inconsistent step count");
    }
    for (const auto& step : traj) {
      if (step.rows() != set.n_samples || step.cols() != set.dim) {
        throw ConfigError("sample set: inconsistent sample block shape");
      }
      append_matrix(payload, step);
    }
  }
  write_container(path, header, payload);
}

SampleSet read_samples(const std::string& path) {
  const Container c = read_container(path);
  require_kind(c.header, "samples", path);
  SampleSet set;
  try {
    set.steps = c.header.at("steps").get<int>();
    set.n_samples = c.header.at("samples").get<int>();
    set.dim = c.header.at("dim").get<Eigen::Index>();
    set.seed = c.header.at("seed").get<std::uint64_t>();
    const auto n_traj = c.header.at("trajectories").get<std::size_t>();
    if (set.steps < 0 || set.n_samples < 1 || set.dim < 1) {
      throw IoError(path + ": invalid sample set shape");
    }
    const std::size_t expected = n_traj * static_cast<std::size_t>(set.steps) *
                                 static_cast<std::size_t>(set.n_samples) *
                                 static_cast<std::size_t>(set.dim);
    if (c.payload.size() != expected) {
      throw IoError(path + ": payload size does not match header shape");
    }
    set.samples.resize(n_traj);
    std::size_t pos = 0;
    for (auto& traj : set.samples) {
      traj.reserve(static_cast<std::size_t>(set.steps));
      for (int k = 0; k < set.steps; ++k) {
        traj.push_back(take_matrix(c.payload, pos, set.n_samples, set.dim));
      }
    }
  } catch (const nlohmann::json::exception& err) {
    throw IoError(path + ": bad sample header: " + err.what());
  }
  return set;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::string& path,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i > 0) out << ',';
    out << columns[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != columns.size()) {
      throw ConfigError("csv row width does not match header");
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  if (!out) throw IoError(path + ": write failed");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace fbf::io
