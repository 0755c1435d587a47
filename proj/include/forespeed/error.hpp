#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace forespeed {

/// Base of every error raised by the toolkit.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : Error {
  ParseError(const std::string& what, int line = 0)
      : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what), line(line) {}
  int line;
};

struct SchemaVersionError : Error {
  using Error::Error;
};

/// A domain invariant does not hold. `field` names the offending field.
struct InvariantViolation : Error {
  explicit InvariantViolation(std::string field_name, const std::string& detail = {})
      : Error(detail.empty() ? field_name : field_name + ": " + detail),
        field(std::move(field_name)) {}
  std::string field;
};

struct PreconditionError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct FoldOverError : Error {
  using Error::Error;
};

struct DegenerateLine : Error {
  using Error::Error;
};

struct DegenerateGrid : Error {
  using Error::Error;
};

/// Point at or beyond the vanishing line of the road plane.
struct HorizonError : Error {
  using Error::Error;
};

struct MissingTimestamp : Error {
  explicit MissingTimestamp(int frame_index)
      : Error("no timestamp for frame " + std::to_string(frame_index)), frame(frame_index) {}
  int frame;
};

struct NonMonotonicTimestamps : Error {
  explicit NonMonotonicTimestamps(int line_number)
      : Error("timestamps not strictly increasing at line " + std::to_string(line_number)),
        line(line_number) {}
  int line;
};

struct ZeroDuration : Error {
  using Error::Error;
};

struct ZeroDistance : Error {
  using Error::Error;
};

struct FrustumError : Error {
  using Error::Error;
};

struct UnknownPassId : Error {
  using Error::Error;
};

struct EmptyAggregate : Error {
  using Error::Error;
};

struct IncompleteAnnotation : Error {
  explicit IncompleteAnnotation(std::vector<std::string> missing_pieces)
      : Error(join(missing_pieces)), missing(std::move(missing_pieces)) {}
  std::vector<std::string> missing;

 private:
  static std::string join(const std::vector<std::string>& parts) {
    std::string out = "incomplete annotation:";
    for (const auto& p : parts) out += " " + p;
    return out;
  }
};

}  // namespace forespeed
