#pragma once

#include <stdexcept>
#include <string>

namespace ssmcovest {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class ZeroNorm : public Error {
 public:
  using Error::Error;
};

class DimensionTooSmall : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class SingularInnovationCovariance : public Error {
 public:
  using Error::Error;
};

// Filter divergence: every particle likelihood underflowed.
class AllWeightsZero : public Error {
 public:
  using Error::Error;
};

// Filter divergence: a transported particle left the finite reals.
class NonFiniteState : public Error {
 public:
  using Error::Error;
};

class DegenerateResiduals : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ssmcovest
