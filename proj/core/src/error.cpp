#include "malsig/error.hpp"

namespace malsig {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::InvalidDim: return "InvalidDim";
    case Errc::DegenerateColumn: return "DegenerateColumn";
    case Errc::HeterogeneousLength: return "HeterogeneousLength";
    case Errc::InsufficientSamples: return "InsufficientSamples";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyIndex: return "EmptyIndex";
    case Errc::CorruptStore: return "CorruptStore";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::UnknownFormat: return "UnknownFormat";
    case Errc::IOFailure: return "IOFailure";
    case Errc::MalformedLabelsFile: return "MalformedLabelsFile";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace malsig
