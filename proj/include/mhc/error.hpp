#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mhc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Distribution or model parameter outside its domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

class SupportError : public Error {
 public:
  using Error::Error;
};

class LatentError : public Error {
 public:
  using Error::Error;
};

class FeatureError : public Error {
 public:
  using Error::Error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class UnavailableError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class EmptySplitError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Population blew past the configured cap. partial_length is the number of
// grid points recorded before the blow-up.
class ExplosionError : public Error {
 public:
  ExplosionError(const std::string& what, std::size_t partial_length)
      : Error(what), partial_length_(partial_length) {}
  std::size_t partial_length() const { return partial_length_; }

 private:
  std::size_t partial_length_;
};

}  // namespace mhc
