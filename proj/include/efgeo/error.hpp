#pragma once

#include <stdexcept>
#include <string>

namespace efgeo {

//! Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

//! Metric not positive definite (smallest eigenvalue below the floor).
class MetricDegeneracyError : public Error {
public:
  using Error::Error;
};

//! Chart jacobian singular at a point.
class ChartDegeneracyError : public Error {
public:
  using Error::Error;
};

class ShapeMismatchError : public Error {
public:
  using Error::Error;
};

class DomainError : public Error {
public:
  using Error::Error;
};

//! Reference-overlap convention cannot fix the phase.
class GaugeFixingError : public Error {
public:
  using Error::Error;
};

class NotHermitianError : public Error {
public:
  using Error::Error;
};

class NormalizationError : public Error {
public:
  using Error::Error;
};

//! Malformed model/geometry file or expression.
class SchemaError : public Error {
public:
  using Error::Error;
};

class LinearSolveError : public Error {
public:
  using Error::Error;
};

} // namespace efgeo
