#pragma once

#include <stdexcept>
#include <string>

namespace kasr {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A tensor or image has the wrong extent along a named axis.
class DimensionError : public Error {
 public:
  DimensionError(std::string op, std::string axis, const std::string& detail)
      : Error(op + ": dimension mismatch on axis '" + axis + "': " + detail),
        op_(std::move(op)),
        axis_(std::move(axis)) {}

  const std::string& op() const noexcept { return op_; }
  const std::string& axis() const noexcept { return axis_; }

 private:
  std::string op_;
  std::string axis_;
};

/// A precondition on arguments (not shapes) was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint decoding failure.
class LoadError : public Error {
 public:
  enum class Kind { BadMagic, Truncated, UnknownVersion, Malformed, Io };

  LoadError(Kind kind, const std::string& detail)
      : Error(std::string("checkpoint load failed (") + kind_name(kind) + "): " + detail), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

  static const char* kind_name(Kind k) {
    switch (k) {
      case Kind::BadMagic: return "bad magic";
      case Kind::Truncated: return "truncated";
      case Kind::UnknownVersion: return "unknown version";
      case Kind::Malformed: return "malformed";
      case Kind::Io: return "io";
    }
    return "?";
  }

 private:
  Kind kind_;
};

/// Image file or dataset directory problems.
class IoError : public Error {
 public:
  enum class Kind { Missing, NotRgb, Malformed, Unwritable, PairMismatch };

  IoError(Kind kind, const std::string& detail) : Error(detail), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Training diverged: too many steps produced non-finite losses or gradients.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace kasr
