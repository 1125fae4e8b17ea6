#include "cwlab/error.hpp"

namespace cwlab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kContract: return "contract";
    case ErrorCode::kDegenerateBatch: return "degenerate-batch";
    case ErrorCode::kConditioning: return "conditioning";
    case ErrorCode::kConfiguration: return "configuration";
    case ErrorCode::kData: return "data";
    case ErrorCode::kStepSize: return "step-size";
    case ErrorCode::kNumerical: return "numerical";
    case ErrorCode::kIndex: return "index";
    case ErrorCode::kLabel: return "label";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kStructure: return "structure";
    case ErrorCode::kMetric: return "metric";
    case ErrorCode::kDegenerateRange: return "degenerate-range";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace cwlab
