#ifndef FBF_RANDOM_HPP
#define FBF_RANDOM_HPP

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string_view>

namespace fbf {

/// Derives a child stream seed from a root seed, a component label and an
/// index. All randomness in the toolkit descends from one root seed through
/// this function, so a full pipeline rerun with the same root seed is
/// bit-identical. The derivation is fixed: FNV-1a over the label, mixed with
/// the root and index through splitmix64.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                          std::uint64_t index = 0);

/// Deterministic random stream. mt19937_64 supplies the bits (its output is
/// pinned by the standard); the normal transform is an explicit Box-Muller so
/// streams do not depend on the standard library's unspecified
/// normal_distribution algorithm.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform draw in [0, 1).
  double uniform() {
    return std::generate_canonical<double, 53>(engine_);
  }

  /// Standard normal draw.
  double normal();

  /// Unbiased uniform integer in [0, n). Requires n >= 1.
  std::uint64_t uniform_index(std::uint64_t n);

  Eigen::VectorXd normal_vector(Eigen::Index n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fbf

#endif  // FBF_RANDOM_HPP
