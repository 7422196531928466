#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cvr {

enum class Errc {
  NormUnderflow,
  ShapeMismatch,
  AllMasked,
  BadMagic,
  DimMismatch,
  DuplicateId,
  TruncatedFile,
  IoError,
  SchemaError,
  NonMonotoneSteps,
  MissingEmbedding,
  InvalidQuery,
  InsufficientCandidates,
  MissingCaptionEmbedding,
  HistoryTooLong,
  TapeMismatch,
  BadDims,
  MissingContext,
  EmptyGrid,
  BadSpec,
  UsageError,
};

std::string_view errc_name(Errc code);

// All library failures are reported through this type; `code()` identifies the kind.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace cvr
