#pragma once

#include <stdexcept>
#include <string>

namespace asyncmic {

// Base of every error raised by the library. The CLI maps subclasses onto
// exit codes, so new failure kinds should derive from the closest family.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad shapes or index ranges.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A state or configuration that does not satisfy the gauge it claims.
class FrameMismatchError : public Error {
 public:
  using Error::Error;
};

// Collinear anchors, coincident microphone/event pairs, degenerate draws.
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

class SingularGeometryError : public DegenerateGeometryError {
 public:
  SingularGeometryError(const std::string& what, int mic, int event)
      : DegenerateGeometryError(what), mic_(mic), event_(event) {}
  int mic() const { return mic_; }
  int event() const { return event_; }

 private:
  int mic_;
  int event_;
};

// Normal equations or Fisher matrix without full rank.
class UnobservableError : public DegenerateGeometryError {
 public:
  UnobservableError(const std::string& what, int rank, int dimension)
      : DegenerateGeometryError(what), rank_(rank), dimension_(dimension) {}
  int rank() const { return rank_; }
  int dimension() const { return dimension_; }

 private:
  int rank_;
  int dimension_;
};

// Unreadable or unwritable files.
class IoError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

// A measurement block required by the chosen mode is absent.
class MissingBlockError : public SchemaError {
 public:
  using SchemaError::SchemaError;
};

// Audio-side failures: wrong event count, silent windows.
class ExtractionError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace asyncmic
