#pragma once

#include <stdexcept>
#include <string>

namespace emfield
{

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments, inconsistent grids, malformed manifests.
class ValidationError : public Error
{
public:
  using Error::Error;
};

/// File system and format failures.
class IoError : public Error
{
public:
  using Error::Error;
};

class MagicError : public IoError
{
public:
  using IoError::IoError;
};

class ChecksumError : public IoError
{
public:
  using IoError::IoError;
};

class TruncatedError : public IoError
{
public:
  using IoError::IoError;
};

/// NaN/Inf produced inside an iterative method.
class NumericalBreakdown : public Error
{
public:
  using Error::Error;
};

namespace detail
{
inline void require(bool condition, const std::string &message)
{
  if (!condition)
  {
    throw ValidationError(message);
  }
}
}  // namespace detail

}  // namespace emfield
