#ifndef FBF_ERRORS_HPP
#define FBF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fbf {

/// Malformed configuration, dimension mismatch between artifacts, unknown keys.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values, failed factorizations, diverged training.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unreadable/unwritable files, corrupt containers, checksum failures.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fbf

#endif  // FBF_ERRORS_HPP
