#include "cvr/error.hpp"

namespace cvr {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::NormUnderflow: return "NormUnderflow";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::AllMasked: return "AllMasked";
    case Errc::BadMagic: return "BadMagic";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::IoError: return "IoError";
    case Errc::SchemaError: return "SchemaError";
    case Errc::NonMonotoneSteps: return "NonMonotoneSteps";
    case Errc::MissingEmbedding: return "MissingEmbedding";
    case Errc::InvalidQuery: return "InvalidQuery";
    case Errc::InsufficientCandidates: return "InsufficientCandidates";
    case Errc::MissingCaptionEmbedding: return "MissingCaptionEmbedding";
    case Errc::HistoryTooLong: return "HistoryTooLong";
    case Errc::TapeMismatch: return "TapeMismatch";
    case Errc::BadDims: return "BadDims";
    case Errc::MissingContext: return "MissingContext";
    case Errc::EmptyGrid: return "EmptyGrid";
    case Errc::BadSpec: return "BadSpec";
    case Errc::UsageError: return "UsageError";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

}  // namespace cvr
