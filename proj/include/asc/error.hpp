#pragma once

#include <stdexcept>
#include <string>

namespace asc {

/// Base of every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values during training (loss or gradients).
class NumericError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  enum class Kind { kMalformedHeader, kUnsupportedCodec, kTruncatedData };
  DecodeError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Raised by the binary readers (weights files, MELF feature files).
class FormatError : public Error {
 public:
  enum class Kind { kBadMagic, kBadVersion, kBadHeader, kTruncated, kChecksum, kDuplicateName, kTrailingBytes };
  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class QuantizationRangeError : public Error {
 public:
  QuantizationRangeError(std::string tensor, const std::string& what)
      : Error(what), tensor_(std::move(tensor)) {}
  const std::string& tensor() const noexcept { return tensor_; }

 private:
  std::string tensor_;
};

}  // namespace asc
