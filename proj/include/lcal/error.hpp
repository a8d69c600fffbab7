#pragma once

#include <stdexcept>
#include <string>

namespace lcal {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
public:
  using Error::Error;
};

class DomainError : public Error {
public:
  using Error::Error;
};

class NumericError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// Malformed input file (PLY header, JSON schema, ...).
class FormatError : public Error {
public:
  using Error::Error;
};

class InsufficientOverlapError : public Error {
public:
  using Error::Error;
};

class InsufficientCorrespondencesError : public Error {
public:
  using Error::Error;
};

/// Minimal sample cannot define a model; RANSAC draws another sample.
class DegenerateSampleError : public Error {
public:
  using Error::Error;
};

/// No LiDAR point projects into the image of a pair.
class NoOverlapError : public Error {
public:
  using Error::Error;
};

class CalibrationFailedError : public Error {
public:
  using Error::Error;
};

/// A pipeline stage failed; what() names the stage.
class StageError : public Error {
public:
  StageError(std::string stage, const std::string& message) : Error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

private:
  std::string stage_;
};

}  // namespace lcal
