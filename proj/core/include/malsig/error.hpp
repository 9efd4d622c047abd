#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace malsig {

enum class Errc {
  EmptyInput,
  InvalidConfig,
  SizeMismatch,
  InvalidDim,
  DegenerateColumn,
  HeterogeneousLength,
  InsufficientSamples,
  DimensionMismatch,
  EmptyIndex,
  CorruptStore,
  VersionMismatch,
  UnknownFormat,
  IOFailure,
  MalformedLabelsFile,
};

std::string_view to_string(Errc code) noexcept;

// Every recoverable failure in the library is reported as an Error carrying
// one of the codes above; the message adds context for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace malsig
