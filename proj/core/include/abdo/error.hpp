#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace abdo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument did not hold.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Two volumes that must share a voxel grid do not.
class GeometryMismatch : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. `offset()` is the byte position of the problem.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), detail_(what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }
  /// Message without the offset suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::size_t offset_;
};

/// An operation received no data at all.
class EmptyInput : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// An operation received fewer samples than it needs.
class InsufficientData : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class UnsupportedType : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace abdo
