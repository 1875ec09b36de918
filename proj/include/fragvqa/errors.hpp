#pragma once

#include <stdexcept>
#include <string>

namespace fragvqa {

// Broad failure categories. The CLI maps them onto process exit codes.
enum class ErrorKind {
  usage,     // bad arguments or configuration
  io,        // file cannot be opened, read or written
  format,    // malformed or unsupported input data
  backend,   // feature backend failure (model files, shapes, NaN)
  shape,     // dimension mismatch between operands
  index,     // coordinate or index out of range
  contract,  // precondition violated by the caller
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::format, what) {}
};

// Malformed Y4M header or payload. Carries the byte offset at which parsing failed.
class ParseError : public FormatError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : FormatError(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Input is well formed but uses a feature this library does not decode.
class UnsupportedFormatError : public FormatError {
 public:
  UnsupportedFormatError(const std::string& what, std::string tag)
      : FormatError(what + ": " + tag), tag_(std::move(tag)) {}

  const std::string& tag() const noexcept { return tag_; }

 private:
  std::string tag_;
};

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what) : Error(ErrorKind::backend, what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorKind::shape, what) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& what) : Error(ErrorKind::index, what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorKind::contract, what) {}
};

// Exit codes used by the command-line tool.
inline int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::usage:
    case ErrorKind::contract:
      return 1;
    case ErrorKind::io:
      return 2;
    case ErrorKind::format:
    case ErrorKind::shape:
    case ErrorKind::index:
      return 3;
    case ErrorKind::backend:
      return 4;
  }
  return 1;
}

}  // namespace fragvqa
