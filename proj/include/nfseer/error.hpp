#pragma once

#include <stdexcept>
#include <string>

namespace nfseer {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A rating token, CSV cell or model file that cannot be parsed.
class ParseError : public Error {
public:
  using Error::Error;
};

/// A numeric argument outside the domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Bad call shape: empty samples, length mismatch, k > n, ...
class ArgumentError : public Error {
public:
  using Error::Error;
};

/// All firing strengths of an ANFIS net vanished for some input.
class DegenerateFiringError : public Error {
public:
  using Error::Error;
};

class DivergenceError : public Error {
public:
  using Error::Error;
};

/// A (driver, rating) pair with no row in the mapping table.
class MappingGapError : public Error {
public:
  using Error::Error;
};

/// Missing rosetta entry for a COCOMO 81 driver.
class ConversionError : public Error {
public:
  using Error::Error;
};

/// Invalid project data (non-positive effort, unknown parameter, ...).
class DataError : public Error {
public:
  using Error::Error;
};

class SpecError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace nfseer
