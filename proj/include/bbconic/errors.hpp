#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace bbconic {

/// Base of every error raised by the library. `kind()` is a stable
/// identifier (used in reports), `witness()` optionally carries the
/// offending object in canonical text form.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message, std::string witness = {})
      : std::runtime_error(message), kind_(std::move(kind)), witness_(std::move(witness)) {}

  const std::string& kind() const noexcept { return kind_; }
  const std::string& witness() const noexcept { return witness_; }

 private:
  std::string kind_;
  std::string witness_;
};

#define BBCONIC_DEFINE_ERROR(Name)                                                   \
  class Name : public Error {                                                        \
   public:                                                                           \
    explicit Name(const std::string& message, std::string witness = {})              \
        : Error(#Name, message, std::move(witness)) {}                               \
  };

// galois
BBCONIC_DEFINE_ERROR(InvalidField)
BBCONIC_DEFINE_ERROR(DivisionByZero)
BBCONIC_DEFINE_ERROR(FieldMismatch)
// projgeom
BBCONIC_DEFINE_ERROR(AmbientMismatch)
// conics
BBCONIC_DEFINE_ERROR(DegenerateInput)
BBCONIC_DEFINE_ERROR(PointNotOnConic)
BBCONIC_DEFINE_ERROR(NotAnArc)
BBCONIC_DEFINE_ERROR(CompletionNotUnique)
// bruckbose
BBCONIC_DEFINE_ERROR(ClosureOverflow)
BBCONIC_DEFINE_ERROR(LemmaViolation)
BBCONIC_DEFINE_ERROR(NotAffine)
// reconstruct
BBCONIC_DEFINE_ERROR(AxiomA1Violation)
BBCONIC_DEFINE_ERROR(AxiomA2Violation)
BBCONIC_DEFINE_ERROR(AxiomA3Violation)
BBCONIC_DEFINE_ERROR(StructureViolation)
BBCONIC_DEFINE_ERROR(NotCollinear)
BBCONIC_DEFINE_ERROR(TangentDegenerate)
BBCONIC_DEFINE_ERROR(SpreadViolation)
BBCONIC_DEFINE_ERROR(NotSkew)
BBCONIC_DEFINE_ERROR(ClosureViolation)
BBCONIC_DEFINE_ERROR(RegularityViolation)
BBCONIC_DEFINE_ERROR(UniquenessViolation)
// cli / io
BBCONIC_DEFINE_ERROR(ParseError)
BBCONIC_DEFINE_ERROR(SizeMismatch)
BBCONIC_DEFINE_ERROR(ConfigError)

#undef BBCONIC_DEFINE_ERROR

}  // namespace bbconic
