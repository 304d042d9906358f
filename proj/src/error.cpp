#include "gadoa/error.hpp"
#include "gadoa/rng.hpp"

namespace gadoa {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kUsage: return "usage";
    case ErrorKind::kInvalidGeometry: return "invalid-geometry";
    case ErrorKind::kInvalidScene: return "invalid-scene";
    case ErrorKind::kSceneSampling: return "scene-sampling";
    case ErrorKind::kIngestion: return "ingestion";
    case ErrorKind::kDegenerateScene: return "degenerate-scene";
    case ErrorKind::kEmptyInput: return "empty-input";
    case ErrorKind::kFeatureShape: return "feature-shape";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kInvalidBatch: return "invalid-batch";
    case ErrorKind::kTrainingFailure: return "training-failure";
    case ErrorKind::kModelLoad: return "model-load";
    case ErrorKind::kEstimationFailure: return "estimation-failure";
    case ErrorKind::kFormat: return "format";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kUsage:
      return 1;
    case ErrorKind::kNumeric:
    case ErrorKind::kTrainingFailure:
    case ErrorKind::kEstimationFailure:
      return 3;
    default:
      return 2;
  }
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ULL + 1));
}

}  // namespace gadoa
