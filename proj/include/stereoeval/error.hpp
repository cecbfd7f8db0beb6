#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

namespace stereoeval {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failures tied to a file or directory on disk. path() names the offender.
class IoError : public Error {
 public:
  IoError(const std::string& what, std::filesystem::path path)
      : Error(what + ": " + path.string()), path_(std::move(path)) {}

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

class MissingPathError : public IoError {
 public:
  using IoError::IoError;
};

class UnreadableFileError : public IoError {
 public:
  using IoError::IoError;
};

class DimensionMismatchError : public IoError {
 public:
  using IoError::IoError;
};

class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class ChannelCountError : public FormatError {
 public:
  using FormatError::FormatError;
};

// In-memory shape disagreement between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

// The input admits no unique answer (empty valid set, constant regressor, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace stereoeval
