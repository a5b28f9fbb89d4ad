#pragma once

#include <stdexcept>
#include <string>

namespace otdenoise {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class EmptySampleError : public Error {
public:
  using Error::Error;
};

class DimError : public Error {
public:
  using Error::Error;
};

class DomainError : public Error {
public:
  using Error::Error;
};

class UnsupportedError : public Error {
public:
  using Error::Error;
};

class DegenerateError : public Error {
public:
  using Error::Error;
};

class MatrixError : public Error {
public:
  using Error::Error;
};

class LowDensityError : public Error {
public:
  using Error::Error;
};

class ZeroRowError : public Error {
public:
  using Error::Error;
};

class AlignError : public Error {
public:
  using Error::Error;
};

class InfeasibleError : public Error {
public:
  using Error::Error;
};

/// Marginal likelihood vanished for a specific observation.
class InfeasibleSampleError : public Error {
public:
  InfeasibleSampleError(const std::string& msg, int observation)
      : Error(msg), observation_(observation) {}
  int observation() const { return observation_; }

private:
  int observation_;
};

class InvariantError : public Error {
public:
  using Error::Error;
};

}  // namespace otdenoise
