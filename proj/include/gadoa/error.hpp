#pragma once

#include <stdexcept>
#include <string>

namespace gadoa {

enum class ErrorKind {
  kUsage,
  kInvalidGeometry,
  kInvalidScene,
  kSceneSampling,
  kIngestion,
  kDegenerateScene,
  kEmptyInput,
  kFeatureShape,
  kNumeric,
  kInvalidBatch,
  kTrainingFailure,
  kModelLoad,
  kEstimationFailure,
  kFormat,
};

/// Library-wide exception. The kind decides the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

// 1 usage, 2 data error, 3 numeric failure.
int exit_code(ErrorKind kind) noexcept;

}  // namespace gadoa
