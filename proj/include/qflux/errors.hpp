#pragma once

#include <stdexcept>
#include <string>

namespace qflux {

// Error taxonomy for the whole library. The split mirrors who can fix the
// problem: ConfigError (and its children) means the caller passed something
// malformed and should correct their input; NumericalError means an algorithm
// broke down at runtime; IntegrityError means an internal contract was
// violated and indicates a bug rather than bad input.
//
// The command line tool maps these onto exit codes: ConfigError -> 2,
// NumericalError -> 3.

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed user-facing input: bad config keys, out-of-range values.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

// Invalid constructor or function arguments (nonpositive length, a grid too
// small to support the difference stencils, mismatched vector sizes).
class ParameterError : public ConfigError {
public:
  explicit ParameterError(const std::string& what) : ConfigError(what) {}
};

// An algorithm failed to produce a trustworthy answer: an eigensolver that
// does not converge, a singular linear system, a step size that blew up.
class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& what) : Error(what) {}
};

// Two states that should be separated in energy are not, so a quantity that
// needs a resolvable gap (a band derivative, an adiabatic label) is undefined.
class DegeneracyError : public NumericalError {
public:
  explicit DegeneracyError(const std::string& what) : NumericalError(what) {}
};

// A phase alignment could not be carried out, e.g. two states that should be
// one smooth family turned out nearly orthogonal.
class GaugeError : public NumericalError {
public:
  explicit GaugeError(const std::string& what) : NumericalError(what) {}
};

// An internal consistency contract failed (a matrix that must be Hermitian
// is not, a cached size disagrees with its grid). Callers cannot repair
// these; they exist so broken invariants surface loudly and early.
class IntegrityError : public Error {
public:
  explicit IntegrityError(const std::string& what) : Error(what) {}
};

} // namespace qflux
