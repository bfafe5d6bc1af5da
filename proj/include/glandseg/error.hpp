#pragma once

#include <stdexcept>
#include <string>

namespace glandseg {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of an operation (e.g. a point off the image).
class InputDomainError : public Error {
 public:
  using Error::Error;
};

/// The input is well-formed but carries too little information to process.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition (mismatched sizes, unnormalized data).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A tunable is outside its legal range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Dataset files could not be paired, decoded or aligned.
class IngestionError : public Error {
 public:
  using Error::Error;
};

class ImageDecodeError : public IngestionError {
 public:
  using IngestionError::IngestionError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ModelFormatError : public Error {
 public:
  using Error::Error;
};

class ModelVersionError : public ModelFormatError {
 public:
  using ModelFormatError::ModelFormatError;
};

class ModelTruncatedError : public ModelFormatError {
 public:
  using ModelFormatError::ModelFormatError;
};

class ModelChecksumError : public ModelFormatError {
 public:
  using ModelFormatError::ModelFormatError;
};

}  // namespace glandseg
