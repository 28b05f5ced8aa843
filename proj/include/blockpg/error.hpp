#pragma once

#include <stdexcept>
#include <string>

namespace blockpg {

//! Base class for all errors raised by the library.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

//! An input violates a documented invariant (model, cover, configuration).
class ValidationError : public Error
{
  public:
    using Error::Error;
};

//! An exact computation would exceed its enumeration cap.
class CapacityError : public Error
{
  public:
    using Error::Error;
};

}  // namespace blockpg
