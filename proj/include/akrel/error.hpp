#pragma once

#include <stdexcept>
#include <string>

namespace akrel {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The regularized correlation matrix stayed indefinite after jitter escalation.
class SingularCorrelation : public Error {
 public:
  using Error::Error;
};

class DuplicatePoints : public Error {
 public:
  using Error::Error;
};

/// An indicator with zero Bernoulli variance has no defined correlation.
class DegenerateIndicator : public Error {
 public:
  using Error::Error;
};

/// Internal invariant violated beyond round-off.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class ExternalEvaluatorFailure : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace akrel
