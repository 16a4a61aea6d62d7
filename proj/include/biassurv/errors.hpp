#pragma once

#include <stdexcept>
#include <string>

namespace biassurv {

//! Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

//! An estimator could not produce a result from the data it was given.
class EstimationError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! Invalid configuration (experiment schema, calibration failure, ...).
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

} // namespace biassurv
