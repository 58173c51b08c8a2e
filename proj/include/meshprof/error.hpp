#pragma once

#include <stdexcept>
#include <string>

namespace meshprof {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or violated preconditions (CLI exit code 2).
class ValidationError : public Error {
public:
  using Error::Error;
};

/// A JSON document that does not describe a valid object. The message names
/// the offending JSON path.
class ParseError : public ValidationError {
public:
  ParseError(const std::string& path, const std::string& what)
      : ValidationError(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

/// A query of the profiled function failed or behaved inconsistently (CLI
/// exit code 3).
class ProfileError : public Error {
public:
  using Error::Error;
};

}  // namespace meshprof
