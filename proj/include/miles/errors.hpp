#ifndef MILES_ERRORS_HPP
#define MILES_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace miles {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid caller-supplied data (labels out of range, empty inputs).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values reached a place where they must not.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (model, scheduler, dataset or run).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A file does not follow the expected layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A file ended before the data its header promised.
class CorruptionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace miles

#endif  // MILES_ERRORS_HPP
