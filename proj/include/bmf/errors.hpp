#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bmf {

// Bad arguments or hyperparameters (CLI exit code 1).
class config_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Malformed input files, out-of-range ratings, duplicate pairs (exit code 2).
class data_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Model and data disagree on matrix dimensions (exit code 2).
class dimension_error : public data_error {
public:
  using data_error::data_error;
};

// A non-finite value appeared during SGD (exit code 3).
class divergence_error : public std::runtime_error {
public:
  divergence_error(const std::string& what, std::size_t user, std::size_t item)
      : std::runtime_error(what), user_(user), item_(item) {}

  std::size_t user() const noexcept { return user_; }
  std::size_t item() const noexcept { return item_; }

private:
  std::size_t user_;
  std::size_t item_;
};

}  // namespace bmf
