#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cslot {

// Base class for every error raised by the toolkit. The CLI reports
// ConfigError as a usage error and everything else as a data error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CSLOT_DEFINE_ERROR(Name)         \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

CSLOT_DEFINE_ERROR(DisjointnessViolation);
CSLOT_DEFINE_ERROR(DuplicateSlot);
CSLOT_DEFINE_ERROR(UnknownSlot);
CSLOT_DEFINE_ERROR(InvalidAtom);
CSLOT_DEFINE_ERROR(InvalidBranch);
CSLOT_DEFINE_ERROR(DepthMismatch);
CSLOT_DEFINE_ERROR(OverlapError);
CSLOT_DEFINE_ERROR(ConfigError);
CSLOT_DEFINE_ERROR(NonFiniteGradient);
CSLOT_DEFINE_ERROR(EmptyCorpus);
CSLOT_DEFINE_ERROR(LabelNotInOntology);
CSLOT_DEFINE_ERROR(LengthMismatch);
CSLOT_DEFINE_ERROR(CheckpointError);
CSLOT_DEFINE_ERROR(IoError);

#undef CSLOT_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace cslot
