#include "mot/error.hpp"

namespace mot {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::InvalidGrid: return "InvalidGrid";
    case Errc::NotInConvexOrder: return "NotInConvexOrder";
    case Errc::NonConvexPrices: return "NonConvexPrices";
    case Errc::DegenerateGrid: return "DegenerateGrid";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteCost: return "NonFiniteCost";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonFinite: return "NonFinite";
    case Errc::StepUnderflow: return "StepUnderflow";
    case Errc::MetadataMissing: return "MetadataMissing";
    case Errc::SizeGuard: return "SizeGuard";
    case Errc::CycleGuard: return "CycleGuard";
    case Errc::InfeasibleMarginals: return "InfeasibleMarginals";
    case Errc::MissingArtifact: return "MissingArtifact";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace mot
