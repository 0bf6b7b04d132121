#pragma once

#include <stdexcept>
#include <string>

namespace unlearn {

// Base for every error the toolkit raises on bad input or undefined results.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input file or value violates a schema or domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A statistic is undefined for the given data (constant sequence, empty cohort).
class UndefinedError : public Error {
 public:
  using Error::Error;
};

}  // namespace unlearn
