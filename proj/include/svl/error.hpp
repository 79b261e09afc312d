#pragma once

#include <stdexcept>
#include <string>

namespace svl {

enum class ErrorCode {
  kInvalidInput = 2,
  kShape = 3,
  kInvalidLabel = 4,
  kFormat = 5,
  kIo = 6,
  kDimensionMismatch = 7,
  kMissingClass = 8,
  kEmptyInput = 9,
  kDegenerateEmbedding = 10,
  kCannotAdapt = 11,
  kConfig = 12,
};

/// Base of every error raised by the library. The code doubles as the CLI
/// exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class InvalidInputError : public Error {
 public:
  explicit InvalidInputError(const std::string& what)
      : Error(ErrorCode::kInvalidInput, what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorCode::kShape, what) {}
};

class InvalidLabelError : public Error {
 public:
  InvalidLabelError(const std::string& what, std::size_t row)
      : Error(ErrorCode::kInvalidLabel, what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

enum class FormatErrorKind { kBadMagic, kVersionMismatch, kTruncated, kTrailingBytes, kUnknownDtype, kNonFinite, kSyntax };

class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what)
      : Error(ErrorCode::kFormat, what), kind_(kind) {}
  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

class DimensionMismatchError : public Error {
 public:
  explicit DimensionMismatchError(const std::string& what)
      : Error(ErrorCode::kDimensionMismatch, what) {}
};

class MissingClassError : public Error {
 public:
  MissingClassError(const std::string& what, int cls)
      : Error(ErrorCode::kMissingClass, what), cls_(cls) {}
  int class_index() const noexcept { return cls_; }

 private:
  int cls_;
};

class EmptyInputError : public Error {
 public:
  explicit EmptyInputError(const std::string& what) : Error(ErrorCode::kEmptyInput, what) {}
};

class DegenerateEmbeddingError : public Error {
 public:
  DegenerateEmbeddingError(const std::string& what, std::size_t row)
      : Error(ErrorCode::kDegenerateEmbedding, what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class CannotAdaptError : public Error {
 public:
  explicit CannotAdaptError(const std::string& what) : Error(ErrorCode::kCannotAdapt, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::kConfig, what) {}
};

}  // namespace svl
