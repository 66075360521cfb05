#pragma once

#include <stdexcept>
#include <string>

namespace aurank {

// Process exit codes used by the command-line tool.
enum class ExitCode : int { ok = 0, config = 2, data = 3, divergence = 4 };

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code)
      : std::runtime_error(what), code_(code) {}
  ExitCode exit_code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("configuration error: " + w, ExitCode::config) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error("shape error: " + w, ExitCode::config) {}
};

struct UsageError : Error {
  explicit UsageError(const std::string& w) : Error("usage error: " + w, ExitCode::config) {}
};

struct InvalidInputError : Error {
  explicit InvalidInputError(const std::string& w) : Error("invalid input: " + w, ExitCode::data) {}
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error("i/o error: " + w, ExitCode::data) {}
};

struct SchemaError : Error {
  explicit SchemaError(const std::string& w) : Error("schema error: " + w, ExitCode::data) {}
};

struct AlignmentError : Error {
  explicit AlignmentError(const std::string& w) : Error("alignment error: " + w, ExitCode::data) {}
};

struct EmptyDatasetError : Error {
  explicit EmptyDatasetError(const std::string& w) : Error("empty dataset: " + w, ExitCode::data) {}
};

struct UndefinedMetricError : Error {
  explicit UndefinedMetricError(const std::string& w) : Error("undefined metric: " + w, ExitCode::data) {}
};

struct DependencyError : Error {
  explicit DependencyError(const std::string& w) : Error("missing dependency: " + w, ExitCode::data) {}
};

struct DivergenceError : Error {
  explicit DivergenceError(const std::string& w) : Error("divergence: " + w, ExitCode::divergence) {}
};

}  // namespace aurank
