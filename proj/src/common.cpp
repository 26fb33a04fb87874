#include "fairaudit/common.hpp"

#include <cstdio>

namespace fairaudit {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kMapping: return "mapping";
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kDegenerateFit: return "degenerate-fit";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kUndefinedMoment: return "undefined-moment";
    case ErrorCode::kUndefinedRate: return "undefined-rate";
    case ErrorCode::kEnumerationLimit: return "enumeration-limit";
    case ErrorCode::kDegenerateExplanation: return "degenerate-explanation";
    case ErrorCode::kKind: return "kind";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kEmptyGroup: return "empty-group";
    case ErrorCode::kTooFewFeatures: return "too-few-features";
    case ErrorCode::kUndefinedCorrelation: return "undefined-correlation";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = uniform();
  while (u <= 0.0) u = uniform();
  const double v = uniform();
  const double r = std::sqrt(-2.0 * std::log(u));
  const double theta = 2.0 * 3.14159265358979323846 * v;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t hash) {
  for (unsigned char b : bytes) {
    hash ^= b;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t hash) {
  return fnv1a(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()),
               hash);
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace fairaudit
