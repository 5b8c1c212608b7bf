#pragma once

#include <stdexcept>
#include <string>

namespace msda {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape / dimension mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid argument value (counts, ranges, simplex violations, math domain).
class ValueError : public Error {
 public:
  using Error::Error;
};

// Out-of-range index (labels, head indices, axes).
class IndexError : public Error {
 public:
  using Error::Error;
};

// Malformed field in an input file (reported with line number where known).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally invalid input file (header, column count).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Invalid experiment / training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing or unusable data (files, datasets).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace msda
