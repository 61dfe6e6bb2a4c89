#include "cloudpatch/error.hpp"

namespace cloudpatch {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kBadMagic: return "BadMagic";
    case ErrorKind::kTruncatedFile: return "TruncatedFile";
    case ErrorKind::kBadDims: return "BadDims";
    case ErrorKind::kIoFailure: return "IoFailure";
    case ErrorKind::kDimMismatch: return "DimMismatch";
    case ErrorKind::kDegenerateGrid: return "DegenerateGrid";
    case ErrorKind::kDegenerateField: return "DegenerateField";
    case ErrorKind::kBadConfig: return "BadConfig";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kOddDims: return "OddDims";
    case ErrorKind::kBadRate: return "BadRate";
    case ErrorKind::kEmptyMask: return "EmptyMask";
    case ErrorKind::kUnsupportedKind: return "UnsupportedKind";
    case ErrorKind::kNonFiniteInput: return "NonFiniteInput";
    case ErrorKind::kAllMissing: return "AllMissing";
    case ErrorKind::kTooFewImages: return "TooFewImages";
    case ErrorKind::kDivergedLoss: return "DivergedLoss";
    case ErrorKind::kConstantSeries: return "ConstantSeries";
    case ErrorKind::kNonFinite: return "NonFinite";
    case ErrorKind::kEmptyRegion: return "EmptyRegion";
    case ErrorKind::kDateMismatch: return "DateMismatch";
    case ErrorKind::kUnknownSubcommand: return "UnknownSubcommand";
    case ErrorKind::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace cloudpatch
