#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace zslgmm {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data. Carries the file and line when known.
class DataError : public Error {
public:
  explicit DataError(const std::string& message) : Error(message) {}
  DataError(const std::string& file, std::size_t line, const std::string& message)
      : Error(file + ":" + std::to_string(line) + ": " + message), file_(file), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

private:
  std::string file_;
  std::size_t line_ = 0;
};

/// Invalid seen/unseen split request.
class SplitError : public Error {
public:
  using Error::Error;
};

/// Factorization failure, non-finite likelihood, and similar.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Bad configuration key or value.
class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace zslgmm
